use serde::de::DeserializeOwned;
use serde::{Serialize, Serializer};

/// Rounds to 9 significant decimal digits.
///
/// Values pass through unchanged when already representable, so rounding is
/// idempotent and a parse of the serialized text yields the same `f64`.
pub fn round_sig9(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return if x == 0.0 { 0.0 } else { x };
    }
    format!("{x:.8e}").parse().unwrap_or(x)
}

pub(crate) fn ser_f64<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_f64(round_sig9(*x))
}

/// Serializes in schema field order, two-space indent, trailing newline.
pub fn to_canonical_json<T: Serialize>(value: &T) -> serde_json::Result<String> {
    let mut out = serde_json::to_string_pretty(value)?;
    out.push('\n');
    Ok(out)
}

pub fn from_json_str<T: DeserializeOwned>(text: &str) -> serde_json::Result<T> {
    serde_json::from_str(text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn keeps_nine_digits() {
        assert_eq!(round_sig9(1.234567891234), 1.23456789);
        assert_eq!(round_sig9(0.0), 0.0);
        assert_eq!(round_sig9(-0.0).to_bits(), 0.0f64.to_bits());
        assert_eq!(round_sig9(125000.0), 125000.0);
    }

    proptest! {
        #[test]
        fn rounding_is_idempotent_through_text(x in -1e12f64..1e12f64) {
            let once = round_sig9(x);
            prop_assert_eq!(round_sig9(once), once);
            let text = serde_json::to_string(&once).unwrap();
            let back: f64 = serde_json::from_str(&text).unwrap();
            prop_assert_eq!(back, once);
        }
    }
}
