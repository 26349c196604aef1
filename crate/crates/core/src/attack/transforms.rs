//! Character-level perturbations of a single word.

use alloc::string::String;
use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

const KEYBOARD_ROWS: [&str; 3] = ["qwertyuiop", "asdfghjkl", "zxcvbnm"];

/// Letters physically adjacent to `c` on a QWERTY keyboard, in the case of `c`.
pub fn keyboard_neighbors(c: char) -> Vec<char> {
    let lower = c.to_ascii_lowercase();
    let mut out = Vec::new();
    for (r, row) in KEYBOARD_ROWS.iter().enumerate() {
        let Some(col) = row.find(lower) else { continue };
        let row_bytes = row.as_bytes();
        if col > 0 {
            out.push(row_bytes[col - 1] as char);
        }
        if col + 1 < row_bytes.len() {
            out.push(row_bytes[col + 1] as char);
        }
        for other in [r.wrapping_sub(1), r + 1] {
            if let Some(adj) = KEYBOARD_ROWS.get(other) {
                let adj = adj.as_bytes();
                for dc in [col.wrapping_sub(1), col, col + 1] {
                    if let Some(&b) = adj.get(dc) {
                        out.push(b as char);
                    }
                }
            }
        }
    }
    out.sort_unstable();
    out.dedup();
    if c.is_ascii_uppercase() {
        out.iter_mut().for_each(|n| *n = n.to_ascii_uppercase());
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CharTransform {
    Insertion,
    Deletion,
    Swap,
    Substitution,
}

impl CharTransform {
    pub const ALL: [CharTransform; 4] = [
        CharTransform::Insertion,
        CharTransform::Deletion,
        CharTransform::Swap,
        CharTransform::Substitution,
    ];
}

/// Positions that count as interior: all but the first and last character,
/// or every position when the word is too short to have an interior.
fn interior(len: usize) -> core::ops::Range<usize> {
    if len >= 3 {
        1..len - 1
    } else {
        0..len
    }
}

/// One seeded application of `kind`, or `None` when it does not apply to `word`
/// or cannot change it.
pub fn apply_transform<R: Rng + ?Sized>(word: &str, kind: CharTransform, rng: &mut R) -> Option<String> {
    let chars: Vec<char> = word.chars().collect();
    let n = chars.len();
    if n == 0 {
        return None;
    }
    let mut out = chars.clone();
    match kind {
        CharTransform::Insertion => {
            let pos = if n == 1 { rng.gen_range(0..=1) } else { rng.gen_range(1..n) };
            let letter = (b'a' + rng.gen_range(0..26u8)) as char;
            out.insert(pos, letter);
        }
        CharTransform::Deletion => {
            if n < 2 {
                return None;
            }
            let pos = rng.gen_range(interior(n));
            out.remove(pos);
        }
        CharTransform::Swap => {
            let pairs: Vec<usize> = (0..n.saturating_sub(1)).filter(|&i| chars[i] != chars[i + 1]).collect();
            if pairs.is_empty() {
                return None;
            }
            let i = pairs[rng.gen_range(0..pairs.len())];
            out.swap(i, i + 1);
        }
        CharTransform::Substitution => {
            let positions: Vec<usize> = interior(n)
                .filter(|&i| !keyboard_neighbors(chars[i]).is_empty())
                .collect();
            if positions.is_empty() {
                return None;
            }
            let pos = positions[rng.gen_range(0..positions.len())];
            let neighbors = keyboard_neighbors(chars[pos]);
            out[pos] = neighbors[rng.gen_range(0..neighbors.len())];
        }
    }
    let s: String = out.into_iter().collect();
    (s != word).then_some(s)
}

/// One variant per applicable transform, in [`CharTransform::ALL`] order, without duplicates.
pub fn char_transforms<R: Rng + ?Sized>(word: &str, rng: &mut R) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    for kind in CharTransform::ALL {
        if let Some(v) = apply_transform(word, kind, rng) {
            if !out.contains(&v) {
                out.push(v);
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::attack::edit::levenshtein;
    use crate::hashing::stream_rng;

    #[test]
    fn neighbors() {
        assert_eq!(keyboard_neighbors('a'), alloc::vec!['q', 's', 'w', 'x', 'z']);
        assert!(keyboard_neighbors('G').iter().all(|c| c.is_ascii_uppercase()));
        assert!(keyboard_neighbors('7').is_empty());
    }

    #[test]
    fn swap_of_bad_is_adjacent() {
        for s in 0..20 {
            let v = apply_transform("bad", CharTransform::Swap, &mut stream_rng(s, &[])).unwrap();
            assert!(v == "abd" || v == "bda", "{v}");
        }
    }

    #[test]
    fn deletion_is_one_edit_and_keeps_ends() {
        for s in 0..20 {
            let v = apply_transform("hate", CharTransform::Deletion, &mut stream_rng(s, &[])).unwrap();
            assert_eq!(levenshtein("hate", &v), 1);
            assert!(v.starts_with('h') && v.ends_with('e'));
        }
    }

    #[test]
    fn single_letter_words() {
        let mut rng = stream_rng(3, &[]);
        assert!(apply_transform("a", CharTransform::Deletion, &mut rng).is_none());
        assert!(apply_transform("a", CharTransform::Swap, &mut rng).is_none());
        assert!(apply_transform("a", CharTransform::Insertion, &mut rng).is_some());
        assert!(apply_transform("a", CharTransform::Substitution, &mut rng).is_some());
        assert!(char_transforms("a", &mut rng).len() <= 2);
    }
}
