//! Text normalization shared by word identity and answer grading.

use unicode_normalization::UnicodeNormalization;

/// Canonical form used for word identity: NFC, trimmed, internal whitespace
/// collapsed to single spaces, then case-folded.
///
/// Unicameral scripts (CJK, Hangul) pass through the case fold unchanged.
pub fn normalize_word(word: &str) -> String {
    let composed: String = word.nfc().collect();
    let collapsed = collapse_whitespace(&composed);
    // Folding can decompose (e.g. U+0130), so recompose afterwards.
    caseless::default_case_fold_str(&collapsed).nfc().collect()
}

/// Canonical form used for grading answers.
///
/// Same pipeline as [`normalize_word`] except that compatibility
/// composition (NFKC) is used instead of NFC, so full-width Latin letters
/// and half-width katakana compare equal to their standard forms.
pub fn normalize_answer(text: &str) -> String {
    let composed: String = text.nfkc().collect();
    let collapsed = collapse_whitespace(&composed);
    caseless::default_case_fold_str(&collapsed).nfkc().collect()
}

fn collapse_whitespace(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn word_normalization_folds_case_and_space() {
        assert_eq!(normalize_word(" Gato "), "gato");
        assert_eq!(normalize_word("GATO"), "gato");
        assert_eq!(normalize_word("buenos   días"), "buenos días");
        assert_eq!(normalize_word("\tStraße\n"), "strasse");
    }

    #[test]
    fn word_normalization_composes() {
        // "e" + combining acute vs precomposed "é"
        assert_eq!(normalize_word("cafe\u{301}"), normalize_word("café"));
    }

    #[test]
    fn unicameral_is_noop() {
        assert_eq!(normalize_word("東京"), "東京");
        assert_eq!(normalize_word("고양이"), "고양이");
        assert_eq!(normalize_answer("東京"), "東京");
    }

    #[test]
    fn answer_normalization_examples() {
        assert_eq!(normalize_answer(" Gato "), "gato");
        assert_eq!(normalize_answer("a  b"), "a b");
        assert_eq!(normalize_answer("ｇａｔｏ"), "gato");
        assert_eq!(normalize_answer("ｶﾞｯｺｳ"), "ガッコウ");
    }

    #[test]
    fn word_identity_keeps_width_distinct() {
        assert_ne!(normalize_word("ｇａｔｏ"), normalize_word("gato"));
    }
}
