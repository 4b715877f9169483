//! Compositions of an integer and their weights in the cumulant expansion.

/// All ordered compositions `l_1 + ... + l_j = m` with parts `>= 1`.
pub fn compositions(m: usize) -> Vec<Vec<usize>> {
    fn rec(rem: usize, prefix: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if rem == 0 {
            out.push(prefix.clone());
            return;
        }
        for l in 1..=rem {
            prefix.push(l);
            rec(rem - l, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    if m > 0 {
        rec(m, &mut Vec::new(), &mut out);
    }
    out
}

pub fn factorial(k: usize) -> f64 {
    (1..=k).map(|i| i as f64).product()
}

/// `(-1)^(j+1) / (j * l_1! ... l_j!)` for a composition with `j` parts.
pub fn composition_weight(parts: &[usize]) -> f64 {
    let j = parts.len();
    let sign = if j % 2 == 1 { 1.0 } else { -1.0 };
    sign / (j as f64 * parts.iter().map(|&l| factorial(l)).product::<f64>())
}

/// `sum |weight|` over the compositions of `m`.
pub fn absolute_weight_sum(m: usize) -> f64 {
    compositions(m).iter().map(|c| composition_weight(c).abs()).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::compensated_sum;

    #[test]
    fn counts_are_powers_of_two() {
        for m in 1..=8 {
            assert_eq!(compositions(m).len(), 1 << (m - 1));
        }
    }

    #[test]
    fn weights_cancel_beyond_first_order() {
        assert_eq!(compensated_sum(compositions(1).iter().map(|c| composition_weight(c))), 1.0);
        for m in 2..=8 {
            let s = compensated_sum(compositions(m).iter().map(|c| composition_weight(c)));
            assert!(s.abs() < 1e-15, "m = {m}: {s}");
        }
    }
}
