//! `--config` files: a JSON object with the same keys as the flags
//! (snake_case). Flags given on the command line win.

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{Map, Value};

use crate::exit::CliError;

pub fn merge_with_file<T: Serialize + DeserializeOwned>(
    flags: &T,
    file: Option<&Path>,
) -> Result<T, CliError> {
    let Some(path) = file else {
        return serde_json::from_value(serde_json::to_value(flags).map_err(CliError::config)?)
            .map_err(CliError::config);
    };
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::io(format!("{}: {e}", path.display())))?;
    let mut base: Map<String, Value> = match serde_json::from_str(&text) {
        Ok(Value::Object(map)) => map,
        Ok(_) => {
            return Err(CliError::config(format!(
                "{}: config must be a JSON object",
                path.display()
            )))
        }
        Err(e) => return Err(CliError::config(format!("{}: {e}", path.display()))),
    };
    base.remove("config");
    let Value::Object(overrides) = serde_json::to_value(flags).map_err(CliError::config)? else {
        unreachable!("argument structs serialize to objects")
    };
    for (key, value) in overrides {
        if !value.is_null() {
            base.insert(key, value);
        }
    }
    serde_json::from_value(Value::Object(base))
        .map_err(|e| CliError::config(format!("{}: {e}", path.display())))
}

pub fn is_false(b: &bool) -> bool {
    !*b
}
