use std::fs;
use std::io::Write;
use std::path::Path;

use serde::Serialize;

use crate::args::Format;

/// Writes `rows` with a leading comment line holding the resolved `config`.
///
/// CSV gets `# config: {json}` followed by the header row; JSON gets an
/// object with `config` and `rows` members.
pub fn write_rows<C: Serialize, R: Serialize>(path: &Path, format: Format, config: &C, rows: &[R]) -> std::io::Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    let config = serde_json::to_value(config)?;
    let mut buf = Vec::new();
    match format {
        Format::Csv => {
            writeln!(buf, "# config: {config}")?;
            let mut w = csv::Writer::from_writer(&mut buf);
            for r in rows {
                w.serialize(r)?;
            }
            w.flush()?;
        }
        Format::Json => {
            #[derive(Serialize)]
            struct Doc<'a, R> {
                config: serde_json::Value,
                rows: &'a [R],
            }
            serde_json::to_writer_pretty(&mut buf, &Doc { config, rows })?;
            buf.push(b'\n');
        }
    }
    fs::write(path, buf)
}
