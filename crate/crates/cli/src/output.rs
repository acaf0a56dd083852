//! CSV writers. Every file starts with `# config-hash: <hex>` so outputs are
//! traceable to the exact inputs that produced them.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use sha2::{Digest, Sha256};
use steadyctl_core::linalg::Mat;
use steadyctl_core::sim::fmt_g9;

use crate::config::CliError;

/// Hash of the resolved input files and parameters.
pub struct ConfigHash(String);

impl ConfigHash {
    pub fn new() -> Self {
        ConfigHash(String::new())
    }

    pub fn add_bytes(&mut self, label: &str, bytes: &[u8]) {
        self.0.push_str(label);
        self.0.push('=');
        let mut hasher = Sha256::new();
        hasher.update(bytes);
        self.0.push_str(&hex(&hasher.finalize()));
        self.0.push(';');
    }

    pub fn add_param(&mut self, label: &str, value: impl std::fmt::Display) {
        self.0.push_str(&format!("{label}={value};"));
    }

    pub fn add_list(&mut self, label: &str, values: &[f64]) {
        let joined: Vec<String> = values.iter().map(|v| fmt_g9(*v)).collect();
        self.add_param(label, joined.join("|"));
    }

    pub fn finish(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update(self.0.as_bytes());
        hex(&hasher.finalize())
    }
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

pub struct CsvFile {
    writer: BufWriter<fs::File>,
}

impl CsvFile {
    pub fn create(dir: &Path, name: &str, hash: &str) -> Result<Self, CliError> {
        fs::create_dir_all(dir)?;
        let file = fs::File::create(dir.join(name))?;
        let mut writer = BufWriter::new(file);
        writeln!(writer, "# config-hash: {hash}")?;
        Ok(Self { writer })
    }

    pub fn line(&mut self, text: &str) -> Result<(), CliError> {
        writeln!(self.writer, "{text}")?;
        Ok(())
    }

    pub fn row(&mut self, fields: &[String]) -> Result<(), CliError> {
        writeln!(self.writer, "{}", fields.join(","))?;
        Ok(())
    }

    pub fn writer(&mut self) -> &mut BufWriter<fs::File> {
        &mut self.writer
    }
}

/// Long-format vector block: one `name,index,value` row per entry (1-based).
pub fn vector_rows(out: &mut CsvFile, name: &str, values: &[f64]) -> Result<(), CliError> {
    for (i, v) in values.iter().enumerate() {
        out.row(&[name.to_string(), (i + 1).to_string(), fmt_g9(*v)])?;
    }
    Ok(())
}

/// Long-format matrix block: one `name,row,col,value` row per entry (1-based).
pub fn matrix_rows(out: &mut CsvFile, name: &str, m: &Mat) -> Result<(), CliError> {
    for i in 0..m.rows() {
        for j in 0..m.cols() {
            out.row(&[
                name.to_string(),
                (i + 1).to_string(),
                (j + 1).to_string(),
                fmt_g9(m[(i, j)]),
            ])?;
        }
    }
    Ok(())
}

pub fn print_vector(name: &str, values: &[f64]) {
    let joined: Vec<String> = values.iter().map(|v| fmt_g9(*v)).collect();
    println!("{name} = [{}]", joined.join(", "));
}
