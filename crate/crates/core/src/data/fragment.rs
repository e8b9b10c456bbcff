//! Balanced splitting of lecture transcripts into fragments.

use super::DataError;

/// How far (in characters) a split may move to land on whitespace.
pub const SNAP_WINDOW: usize = 200;

/// Splits `text` into `ceil(chars / target_len)` contiguous fragments.
///
/// Boundaries start evenly spaced, then move to the nearest whitespace within
/// [`SNAP_WINDOW`] characters (capped at a quarter of the balanced length for
/// short targets). No fragment exceeds `target_len + SNAP_WINDOW` characters
/// and the fragments concatenate back to `text` exactly.
pub fn fragment_transcript(text: &str, target_len: usize) -> Result<Vec<&str>, DataError> {
    if target_len == 0 {
        return Err(DataError::InvalidTarget(target_len));
    }
    if text.is_empty() {
        return Err(DataError::EmptyText);
    }
    // byte offset of every char, plus the end
    let offsets: Vec<usize> = text
        .char_indices()
        .map(|(i, _)| i)
        .chain(std::iter::once(text.len()))
        .collect();
    let chars: Vec<char> = text.chars().collect();
    let len = chars.len();
    let count = len.div_ceil(target_len);
    if count == 1 {
        return Ok(vec![text]);
    }

    let balanced = len / count;
    let radius = SNAP_WINDOW.min(balanced / 4);
    let max_len = target_len + SNAP_WINDOW;
    let mut cuts = Vec::with_capacity(count + 1);
    cuts.push(0usize);
    for i in 1..count {
        let ideal = (i * len + count / 2) / count;
        let prev = *cuts.last().expect("non-empty");
        let lo = ideal.saturating_sub(radius).max(prev + 1);
        let hi = (ideal + radius).min(prev + max_len).min(len - 1);
        let cut = (lo..=hi)
            .filter(|&p| chars[p - 1].is_whitespace())
            .min_by_key(|&p| (p.abs_diff(ideal), p))
            .unwrap_or(ideal);
        cuts.push(cut);
    }
    cuts.push(len);
    Ok(cuts
        .windows(2)
        .map(|w| &text[offsets[w[0]]..offsets[w[1]]])
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn twelve_thousand_chars_make_three_fragments() {
        let text = "word ".repeat(2400);
        let parts = fragment_transcript(&text, 5000).unwrap();
        assert_eq!(parts.len(), 3);
        for p in &parts {
            assert!((3800..=4200).contains(&p.chars().count()), "{}", p.len());
            assert!(p.ends_with(' '));
        }
        assert_eq!(parts.concat(), text);
    }

    #[test]
    fn without_whitespace_split_is_balanced() {
        let text = "x".repeat(12_001);
        let parts = fragment_transcript(&text, 5000).unwrap();
        let lens: Vec<_> = parts.iter().map(|p| p.len()).collect();
        assert_eq!(lens.iter().sum::<usize>(), 12_001);
        assert!(lens.iter().max().unwrap() - lens.iter().min().unwrap() <= 1);
    }

    #[test]
    fn short_text_is_one_fragment() {
        let text = "a".repeat(4999);
        assert_eq!(fragment_transcript(&text, 5000).unwrap(), vec![text.as_str()]);
    }

    #[test]
    fn degenerate_inputs() {
        assert!(matches!(fragment_transcript("", 5000), Err(DataError::EmptyText)));
        assert!(matches!(fragment_transcript("abc", 0), Err(DataError::InvalidTarget(0))));
    }

    #[test]
    fn multibyte_text_splits_on_char_boundaries() {
        let text = "é漢字 ".repeat(3000);
        let parts = fragment_transcript(&text, 1000).unwrap();
        assert_eq!(parts.len(), 12);
        assert_eq!(parts.concat(), text);
    }

    proptest! {
        #[test]
        fn partition_properties(text in "\\PC{1,3000}", target in 1usize..700) {
            let parts = fragment_transcript(&text, target).unwrap();
            let len = text.chars().count();
            prop_assert_eq!(parts.len(), len.div_ceil(target));
            prop_assert_eq!(parts.concat(), text.clone());
            for p in &parts {
                prop_assert!(!p.is_empty());
                prop_assert!(p.chars().count() <= target + SNAP_WINDOW);
            }
        }
    }
}
