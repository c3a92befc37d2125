//! ToyNetwork files: `{"input_dim": n, "blocks": [{"kind", "weight", "bias"}]}`.

use std::fs;
use std::path::Path;

use crate::attribution::ToyNetwork;
use crate::error::Result;

pub fn load_network(path: impl AsRef<Path>) -> Result<ToyNetwork> {
    let path = path.as_ref();
    let read = || -> Result<ToyNetwork> { Ok(serde_json::from_str(&fs::read_to_string(path)?)?) };
    read().map_err(|e| e.in_file(path))
}

pub fn save_network(net: &ToyNetwork, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let write = || -> Result<()> {
        let mut text = serde_json::to_string_pretty(net)?;
        text.push('\n');
        fs::write(path, text)?;
        Ok(())
    };
    write().map_err(|e| e.in_file(path))
}
