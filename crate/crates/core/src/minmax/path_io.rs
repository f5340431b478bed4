//! Path directory format: manifest.json naming a reference mesh and an
//! ordered list of frame files sharing its vertex order.

use crate::error::{Error, Result};
use crate::mesh::io::{read_immersion, read_reference_sphere, write_immersion, write_mesh_file};
use crate::minmax::{init_path, PathInterior, PathState};
use serde::{Deserialize, Serialize};
use std::path::Path;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PathManifest {
    pub mesh: String,
    pub frames: Vec<String>,
    pub pinned: bool,
}

/// Loads a path from a directory with manifest.json; validates frame count
/// and shared combinatorics.
pub fn load_path(dir: &Path) -> Result<PathState> {
    let manifest_path = dir.join("manifest.json");
    let text = std::fs::read_to_string(&manifest_path)
        .map_err(|e| Error::Io(format!("{}: {e}", manifest_path.display())))?;
    let manifest: PathManifest =
        serde_json::from_str(&text).map_err(|e| Error::Io(format!("manifest.json: {e}")))?;
    if manifest.frames.len() < 3 {
        return Err(Error::Parameter(format!(
            "path needs at least 3 frames, manifest lists {}",
            manifest.frames.len()
        )));
    }
    let mesh = read_reference_sphere(&dir.join(&manifest.mesh))?;
    let mut frames = Vec::with_capacity(manifest.frames.len());
    for name in &manifest.frames {
        frames.push(read_immersion(&dir.join(name), Some(mesh.clone()))?);
    }
    let last = frames.len() - 1;
    let start = frames[0].clone();
    let end = frames[last].clone();
    let interior = frames[1..last].to_vec();
    let mut path = init_path(start, end, PathInterior::Frames(interior))?;
    path.endpoints_pinned = manifest.pinned;
    Ok(path)
}

/// Writes a path as a directory of OFF frames plus manifest.json.
pub fn save_path(dir: &Path, path: &PathState) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::Io(format!("{}: {e}", dir.display())))?;
    write_mesh_file(
        &dir.join("reference.off"),
        path.mesh.points(),
        path.mesh.faces(),
    )?;
    let mut names = Vec::new();
    for (i, frame) in path.frames.iter().enumerate() {
        let name = format!("frame_{i:04}.off");
        write_immersion(&dir.join(&name), frame)?;
        names.push(name);
    }
    let manifest = PathManifest {
        mesh: "reference.off".into(),
        frames: names,
        pinned: path.endpoints_pinned,
    };
    let text = serde_json::to_string_pretty(&manifest)
        .map_err(|e| Error::Io(format!("manifest serialization: {e}")))?;
    std::fs::write(dir.join("manifest.json"), text)
        .map_err(|e| Error::Io(format!("{}: {e}", dir.display())))?;
    Ok(())
}

/// Orientation probe for eversion-style sequences: signed volumes of the two
/// endpoint frames.
pub fn endpoint_signed_volumes(path: &PathState) -> (f64, f64) {
    (
        path.frames[0].signed_volume(),
        path.frames[path.len() - 1].signed_volume(),
    )
}

/// Checks whether a frame sequence reverses orientation end to end.
pub fn is_everting(path: &PathState) -> bool {
    let (a, b) = endpoint_signed_volumes(path);
    a * b < 0.0
}
