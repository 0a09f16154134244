//! Config-file merging, working directory and run manifest.

use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{json, Map, Value};

use crate::Failure;

/// Loads a JSON object of flag values. Keys are flag names without the
/// leading dashes.
pub fn load(path: &Path) -> Result<Map<String, Value>, Failure> {
    let text = fs::read_to_string(path).map_err(|e| Failure::Usage(format!("cannot read config {}: {e}", path.display())))?;
    match serde_json::from_str(&text) {
        Ok(Value::Object(m)) => Ok(m),
        Ok(_) => Err(Failure::Usage(format!("config {} is not a JSON object", path.display()))),
        Err(e) => Err(Failure::Usage(format!("config {}: {e}", path.display()))),
    }
}

/// Fills every flag left unset on the command line from the config file.
pub fn merge<T: Serialize + DeserializeOwned>(cli: T, file: Option<&Map<String, Value>>) -> Result<(T, Value), Failure> {
    let mut value = serde_json::to_value(&cli).map_err(|e| Failure::Usage(e.to_string()))?;
    if let (Some(file), Value::Object(obj)) = (file, &mut value) {
        for (k, v) in file {
            let key = k.replace('_', "-");
            match obj.get(&key) {
                None => return Err(Failure::Usage(format!("unknown config key '{k}'"))),
                Some(Value::Null) | Some(Value::Bool(false)) => {
                    obj.insert(key, v.clone());
                }
                Some(_) => {}
            }
        }
    }
    let merged = serde_json::from_value(value.clone()).map_err(|e| Failure::Usage(format!("config: {e}")))?;
    Ok((merged, value))
}

pub struct Context {
    pub workdir: Option<PathBuf>,
}

impl Context {
    pub fn new(workdir: Option<PathBuf>) -> Result<Self, Failure> {
        if let Some(d) = &workdir {
            fs::create_dir_all(d).map_err(|e| Failure::Usage(format!("cannot create workdir {}: {e}", d.display())))?;
        }
        Ok(Self { workdir })
    }

    /// Relative paths live under the working directory when one is set.
    pub fn path(&self, p: &Path) -> PathBuf {
        match &self.workdir {
            Some(d) if p.is_relative() => d.join(p),
            _ => p.to_path_buf(),
        }
    }

    /// Default report location: `report.json` in the working directory.
    pub fn report(&self, explicit: Option<&PathBuf>) -> Option<PathBuf> {
        match explicit {
            Some(p) => Some(self.path(p)),
            None => self.workdir.as_ref().map(|d| d.join("report.json")),
        }
    }

    /// Appends one entry to `manifest.json` in the working directory.
    pub fn record(&self, command: &str, config: &Value, outputs: &[PathBuf]) -> Result<(), Failure> {
        let Some(dir) = &self.workdir else { return Ok(()) };
        let path = dir.join("manifest.json");
        let mut manifest = match fs::read_to_string(&path) {
            Ok(text) => serde_json::from_str(&text).map_err(|e| Failure::Usage(format!("corrupt manifest {}: {e}", path.display())))?,
            Err(_) => json!({ "runs": [] }),
        };
        let outputs: Vec<String> = outputs.iter().map(|p| p.display().to_string()).collect();
        if let Some(runs) = manifest.get_mut("runs").and_then(Value::as_array_mut) {
            runs.push(json!({ "command": command, "config": config, "outputs": outputs }));
        }
        fs::write(&path, serde_json::to_string_pretty(&manifest).unwrap()).map_err(|e| Failure::Core(e.into()))
    }
}
