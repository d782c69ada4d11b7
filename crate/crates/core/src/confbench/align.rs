pub const MATCH: i32 = 2;
pub const MISMATCH: i32 = -1;
/// Linear gap penalty per position.
pub const GAP: i32 = -2;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SequenceAlignment {
    pub score: i32,
    /// Aligned (non-gap) position pairs, increasing in both sequences.
    pub pairs: Vec<(usize, usize)>,
}

impl SequenceAlignment {
    /// Partner in `b` of position `i` of `a`.
    pub fn partner(&self, i: usize) -> Option<usize> {
        self.pairs.iter().find(|p| p.0 == i).map(|p| p.1)
    }
}

/// Local alignment with linear gaps. The first maximal cell in row-major
/// order ends the alignment; traceback prefers diagonal, then gap in `b`,
/// then gap in `a`.
pub fn smith_waterman(a: &str, b: &str) -> SequenceAlignment {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    let (n, m) = (a.len(), b.len());
    let mut h = vec![vec![0i32; m + 1]; n + 1];
    let mut best = (0, 0, 0);
    for i in 1..=n {
        for j in 1..=m {
            let s = if a[i - 1] == b[j - 1] { MATCH } else { MISMATCH };
            let v = 0.max(h[i - 1][j - 1] + s).max(h[i - 1][j] + GAP).max(h[i][j - 1] + GAP);
            h[i][j] = v;
            if v > best.0 {
                best = (v, i, j);
            }
        }
    }
    let (score, mut i, mut j) = best;
    let mut pairs = Vec::new();
    while i > 0 && j > 0 && h[i][j] > 0 {
        let s = if a[i - 1] == b[j - 1] { MATCH } else { MISMATCH };
        if h[i][j] == h[i - 1][j - 1] + s {
            pairs.push((i - 1, j - 1));
            i -= 1;
            j -= 1;
        } else if h[i][j] == h[i - 1][j] + GAP {
            i -= 1;
        } else {
            j -= 1;
        }
    }
    pairs.reverse();
    SequenceAlignment { score, pairs }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_sequences_align_fully() {
        let a = smith_waterman("ACDEFGHIK", "ACDEFGHIK");
        assert_eq!(a.score, 18);
        assert_eq!(a.pairs, (0..9).map(|i| (i, i)).collect::<Vec<_>>());
    }

    #[test]
    fn insertion_is_skipped() {
        // Three extra residues in the middle of b cost 3 gaps (−6), still
        // cheaper than losing the five matches after them.
        let a = smith_waterman("MKTAYIAKQR", "MKTAYWWWIAKQR");
        assert_eq!(a.partner(5), Some(8));
        assert_eq!(a.partner(4), Some(4));
        assert_eq!(a.score, 20 - 6);
    }

    #[test]
    fn local_alignment_ignores_flanks() {
        let a = smith_waterman("WWWWACDEFWWWW", "PPACDEFPP");
        assert_eq!(a.score, 10);
        assert_eq!(a.pairs.first(), Some(&(4, 2)));
        assert_eq!(smith_waterman("AAAA", "CCCC").pairs, vec![]);
    }
}
