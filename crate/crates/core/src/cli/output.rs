//! Atomic report files and resumable CSV sweeps.

use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use super::CliError;

/// Writes `bytes` to a sibling temporary file and renames it over `path`,
/// so readers see either the old file or the complete new one.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let dir = path.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_else(|| "out".into());
    let tmp = dir.join(format!(".{name}.tmp-{}", std::process::id()));
    let mut f = File::create(&tmp)?;
    f.write_all(bytes)?;
    f.sync_all()?;
    drop(f);
    fs::rename(&tmp, path).inspect_err(|_| {
        let _ = fs::remove_file(&tmp);
    })
}

/// One CSV line, quoted where needed.
pub fn csv_line(fields: &[String]) -> Result<String, CliError> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    w.write_record(fields).map_err(|e| CliError::internal(e.to_string()))?;
    let bytes = w.into_inner().map_err(|e| CliError::internal(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| CliError::internal(e.to_string()))
}

pub fn partial_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".partial");
    PathBuf::from(s)
}

const MARKER: &str = "# klslab sweep config-sha256=";

/// Runs `count` rows in order. With an output path, each finished row is
/// appended and synced to `<out>.partial`, whose first line records the
/// config hash; a rerun with the same hash skips the rows already there,
/// and a different hash is refused. The final CSV replaces `out`
/// atomically and the partial file is removed. Without a path the CSV is
/// returned.
pub fn run_sweep(
    out: Option<&Path>,
    hash: &str,
    header: &[&str],
    count: usize,
    mut row: impl FnMut(usize) -> Result<Vec<String>, CliError>,
) -> Result<Option<String>, CliError> {
    let head = csv_line(&header.iter().map(|s| s.to_string()).collect::<Vec<_>>())?;
    let Some(out) = out else {
        let mut text = head;
        for i in 0..count {
            text.push_str(&csv_line(&row(i)?)?);
        }
        return Ok(Some(text));
    };
    let partial = partial_path(out);
    let mut done: Vec<String> = Vec::new();
    if partial.exists() {
        let lines = read_complete_lines(&partial)?;
        let recorded = lines.first().and_then(|l| l.strip_prefix(MARKER)).map(str::trim);
        if recorded != Some(hash) {
            return Err(CliError::config(format!(
                "{} was written by a different config (hash {}); refusing to resume",
                partial.display(),
                recorded.unwrap_or("missing")
            )));
        }
        if lines.get(1).map(|l| format!("{l}\n")) != Some(head.clone()) {
            return Err(CliError::config(format!("{} has an unexpected header; refusing to resume", partial.display())));
        }
        done = lines[2..].iter().map(|l| format!("{l}\n")).collect();
        if done.len() > count {
            return Err(CliError::config(format!("{} has more rows than the sweep", partial.display())));
        }
        rewrite(&partial, hash, &head, &done)?;
    } else {
        rewrite(&partial, hash, &head, &[])?;
    }
    let mut file = OpenOptions::new().append(true).open(&partial).map_err(CliError::io)?;
    for i in done.len()..count {
        let line = csv_line(&row(i)?)?;
        file.write_all(line.as_bytes()).map_err(CliError::io)?;
        file.sync_data().map_err(CliError::io)?;
        done.push(line);
    }
    drop(file);
    let mut text = head;
    done.iter().for_each(|l| text.push_str(l));
    write_atomic(out, text.as_bytes()).map_err(CliError::io)?;
    fs::remove_file(&partial).map_err(CliError::io)?;
    Ok(None)
}

/// Lines ending in a newline; a trailing fragment from an interrupted
/// write is dropped.
fn read_complete_lines(path: &Path) -> Result<Vec<String>, CliError> {
    let mut lines = Vec::new();
    let mut reader = BufReader::new(File::open(path).map_err(CliError::io)?);
    let mut buf = String::new();
    loop {
        buf.clear();
        let k = reader.read_line(&mut buf).map_err(CliError::io)?;
        if k == 0 || !buf.ends_with('\n') {
            break;
        }
        lines.push(buf.trim_end_matches('\n').to_string());
    }
    Ok(lines)
}

fn rewrite(partial: &Path, hash: &str, head: &str, rows: &[String]) -> Result<(), CliError> {
    let mut text = format!("{MARKER}{hash}\n{head}");
    rows.iter().for_each(|r| text.push_str(r));
    write_atomic(partial, text.as_bytes()).map_err(CliError::io)
}
