//! Reading log files, plain or gzip-compressed, into a [`LogIngest`].
//!
//! Input is cut into newline-aligned blocks. With more than one thread the
//! blocks go to a pool of workers, each with its own `LogIngest`, and the
//! partial tallies are merged at the end. Counts live in ordered maps, so the
//! result does not depend on how the lines were split up.

use std::fs::File;
use std::io::{self, BufReader, ErrorKind, Read};
use std::path::{Path, PathBuf};
use std::sync::{mpsc, Mutex};
use std::thread;

use flate2::read::MultiGzDecoder;
use webzipf_core::{LogFormat, LogIngest};

const BLOCK_BYTES: usize = 1 << 22;

#[derive(Debug, thiserror::Error)]
#[error("cannot read {}: {source}", path.display())]
pub struct InputError {
    pub path: PathBuf,
    #[source]
    pub source: io::Error,
}

/// Opens `path`, decompressing on the fly when the name ends in `.gz`.
pub fn open_input(path: &Path) -> Result<Box<dyn Read + Send>, InputError> {
    let file = File::open(path).map_err(|source| InputError { path: path.to_path_buf(), source })?;
    let file = BufReader::new(file);
    if path.extension().is_some_and(|e| e == "gz") {
        Ok(Box::new(MultiGzDecoder::new(file)))
    } else {
        Ok(Box::new(file))
    }
}

/// Parses every file and merges the tallies.
pub fn ingest_files<P: AsRef<Path>>(paths: &[P], format: LogFormat, threads: usize) -> Result<LogIngest, InputError> {
    let mut total = LogIngest::new(format);
    for path in paths {
        let path = path.as_ref();
        let reader = open_input(path)?;
        let part =
            ingest_reader(reader, format, threads).map_err(|source| InputError { path: path.to_path_buf(), source })?;
        total.merge(part);
    }
    Ok(total)
}

pub fn ingest_reader<R: Read>(reader: R, format: LogFormat, threads: usize) -> io::Result<LogIngest> {
    if threads <= 1 {
        let mut ingest = LogIngest::new(format);
        for_each_block(reader, BLOCK_BYTES, |block| feed_block(&mut ingest, &block))?;
        return Ok(ingest);
    }

    let (tx, rx) = mpsc::sync_channel::<Vec<u8>>(2 * threads);
    let rx = Mutex::new(rx);
    thread::scope(|s| {
        let workers: Vec<_> = (0..threads)
            .map(|_| {
                s.spawn(|| {
                    let mut ingest = LogIngest::new(format);
                    loop {
                        let block = match rx.lock().expect("block queue poisoned").recv() {
                            Ok(block) => block,
                            Err(_) => break,
                        };
                        feed_block(&mut ingest, &block);
                    }
                    ingest
                })
            })
            .collect();
        let read = for_each_block(reader, BLOCK_BYTES, |block| {
            // workers only hang up by panicking, which the join below reports
            let _ = tx.send(block);
        });
        drop(tx);
        let mut total = LogIngest::new(format);
        for w in workers {
            total.merge(w.join().expect("ingest worker panicked"));
        }
        read.map(|()| total)
    })
}

fn feed_block(ingest: &mut LogIngest, block: &[u8]) {
    let block = block.strip_suffix(b"\n").unwrap_or(block);
    for line in block.split(|&b| b == b'\n') {
        let line = line.strip_suffix(b"\r").unwrap_or(line);
        match std::str::from_utf8(line) {
            Ok(text) => ingest.feed_line(text),
            Err(_) => ingest.feed_undecodable(),
        }
    }
}

/// Hands `sink` blocks of whole lines. Only the last block may lack a
/// trailing newline.
fn for_each_block<R: Read>(mut reader: R, block_bytes: usize, mut sink: impl FnMut(Vec<u8>)) -> io::Result<()> {
    let mut buf: Vec<u8> = Vec::new();
    loop {
        let start = buf.len();
        buf.resize(start + block_bytes, 0);
        let n = read_full(&mut reader, &mut buf[start..])?;
        buf.truncate(start + n);
        if n == 0 {
            if !buf.is_empty() {
                sink(buf);
            }
            return Ok(());
        }
        if let Some(pos) = buf[start..].iter().rposition(|&b| b == b'\n') {
            let rest = buf.split_off(start + pos + 1);
            sink(std::mem::replace(&mut buf, rest));
        }
    }
}

fn read_full<R: Read>(reader: &mut R, buf: &mut [u8]) -> io::Result<usize> {
    let mut filled = 0;
    while filled < buf.len() {
        match reader.read(&mut buf[filled..]) {
            Ok(0) => break,
            Ok(n) => filled += n,
            Err(e) if e.kind() == ErrorKind::Interrupted => {}
            Err(e) => return Err(e),
        }
    }
    Ok(filled)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Reader returning at most `step` bytes per call.
    struct Trickle<'a> {
        data: &'a [u8],
        step: usize,
    }

    impl Read for Trickle<'_> {
        fn read(&mut self, buf: &mut [u8]) -> io::Result<usize> {
            let n = self.step.min(buf.len()).min(self.data.len());
            buf[..n].copy_from_slice(&self.data[..n]);
            self.data = &self.data[n..];
            Ok(n)
        }
    }

    #[test]
    fn blocks_end_on_line_boundaries() {
        let data: Vec<u8> = (0..200_000).flat_map(|i| format!("line {i}\n").into_bytes()).collect();
        let mut blocks = Vec::new();
        for_each_block(Trickle { data: &data, step: 7919 }, 1 << 16, |b| blocks.push(b)).unwrap();
        assert!(blocks.len() > 20);
        assert!(blocks.iter().all(|b| b.ends_with(b"\n")));
        assert_eq!(blocks.concat(), data);
    }

    #[test]
    fn unterminated_last_line_and_crlf() {
        let text = b"a\r\n\xff\xfe\nlast";
        let mut ingest = LogIngest::new(LogFormat::SquidNative);
        for_each_block(&text[..], 4, |b| feed_block(&mut ingest, &b)).unwrap();
        assert_eq!(ingest.stats().lines_total, 3);
        assert_eq!(ingest.stats().rejected_malformed, 3);
    }
}
