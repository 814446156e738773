pub mod fit;
pub mod influence;
pub mod simulate;
pub mod sweep;

use serde::Serialize;

/// Pretty JSON with a trailing newline.
pub(crate) fn to_json(value: &impl Serialize) -> String {
    serde_json::to_string_pretty(value).expect("reports serialize") + "\n"
}
