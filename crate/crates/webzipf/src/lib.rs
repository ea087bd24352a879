//! File formats, log ingestion and the `webzipf` command-line tool built on
//! [`webzipf_core`].

pub mod cli;
pub mod io;
pub mod report;
pub mod tsv;

pub use io::{ingest_files, ingest_reader, open_input, InputError};
pub use tsv::{format_g17, read_distribution, write_distribution, DistFile, TsvError};
