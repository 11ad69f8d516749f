//! Statistics used to judge cipher output quality.

/// 99% critical value of the chi-squared distribution at 63 degrees of
/// freedom (uniformity over 64 word values).
pub const CHI2_99_DOF63: f64 = 92.010;

/// Chi-squared statistic of word counts against a uniform distribution.
pub fn chi2_uniform(counts: &[u64]) -> f64 {
    let n: u64 = counts.iter().sum();
    if n == 0 || counts.is_empty() {
        return 0.0;
    }
    let expected = n as f64 / counts.len() as f64;
    counts.iter().map(|c| (*c as f64 - expected).powi(2) / expected).sum()
}

/// Pearson correlation of two equally long sequences.
pub fn pearson(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let n = a.len() as f64;
    if n < 2.0 {
        return 0.0;
    }
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut va = 0.0;
    let mut vb = 0.0;
    for (x, y) in a.iter().zip(b) {
        cov += (x - ma) * (y - mb);
        va += (x - ma) * (x - ma);
        vb += (y - mb) * (y - mb);
    }
    if va == 0.0 || vb == 0.0 {
        0.0
    } else {
        cov / (va.sqrt() * vb.sqrt())
    }
}

/// Histogram of 6-bit words.
pub fn word_histogram(words: &[u8]) -> [u64; 64] {
    let mut counts = [0u64; 64];
    for w in words {
        counts[(*w & 0x3F) as usize] += 1;
    }
    counts
}
