//! Command-line surface tying the pipeline together.

use std::io;
use std::path::Path;

/// Writes a file atomically: write to a sibling temp file, then rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> io::Result<()> {
    let tmp = path.with_extension("tmp-write");
    std::fs::write(&tmp, bytes)?;
    std::fs::rename(&tmp, path)
}
