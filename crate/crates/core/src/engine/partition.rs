use std::ops::Range;

/// Splits `0..n` into at most `workers` contiguous ranges of near-equal size.
///
/// Ranges are ascending, non-empty and cover `0..n` exactly.
pub fn partition(n: usize, workers: usize) -> Vec<Range<usize>> {
    let w = workers.clamp(1, n.max(1)) as u128;
    if n == 0 {
        return Vec::new();
    }
    let bound = |k: u128| (k * n as u128 / w) as usize;
    (0..w).map(|k| bound(k)..bound(k + 1)).collect()
}

/// Splits `buf` into consecutive pieces of `width * range.len()` elements.
pub(crate) fn split_by_ranges<'a, T>(
    mut buf: &'a mut [T],
    ranges: &[Range<usize>],
    width: usize,
) -> Vec<&'a mut [T]> {
    let mut out = Vec::with_capacity(ranges.len());
    for r in ranges {
        let (head, tail) = buf.split_at_mut(r.len() * width);
        out.push(head);
        buf = tail;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn small_cases() {
        assert_eq!(partition(10, 3), [0..3, 3..6, 6..10]);
        assert_eq!(partition(2, 8), [0..1, 1..2]);
        assert_eq!(partition(5, 1), vec![(0..5)]);
        assert!(partition(0, 4).is_empty());
    }

    proptest! {
        #[test]
        fn covers_disjointly(n in 0usize..100_000, workers in 1usize..17) {
            let parts = partition(n, workers);
            prop_assert!(parts.len() <= workers);
            let mut next = 0;
            for r in &parts {
                prop_assert_eq!(r.start, next);
                prop_assert!(r.end > r.start);
                next = r.end;
            }
            prop_assert_eq!(next, n);
            if let (Some(max), Some(min)) = (parts.iter().map(|r| r.len()).max(), parts.iter().map(|r| r.len()).min()) {
                prop_assert!(max - min <= 1);
            }
        }
    }
}
