use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use facademap_core::ingest::{write_gray, write_image, GrayImage, RgbImage};

/// Writes files under a root directory and remembers what it wrote, so a
/// failed run can remove its partial outputs.
pub struct OutputTree {
    root: PathBuf,
    written: Vec<String>,
}

impl OutputTree {
    pub fn new(root: &Path) -> Result<Self> {
        fs::create_dir_all(root).with_context(|| format!("creating {}", root.display()))?;
        Ok(Self {
            root: root.to_path_buf(),
            written: Vec::new(),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    /// Relative paths written so far, in write order.
    pub fn written(&self) -> &[String] {
        &self.written
    }

    fn prepare(&mut self, rel: &str) -> Result<PathBuf> {
        let path = self.root.join(rel);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
        }
        self.written.push(rel.to_string());
        Ok(path)
    }

    pub fn text(&mut self, rel: &str, text: &str) -> Result<()> {
        let path = self.prepare(rel)?;
        fs::write(&path, text).with_context(|| format!("writing {}", path.display()))
    }

    pub fn rgb(&mut self, rel: &str, img: &RgbImage) -> Result<()> {
        let path = self.prepare(rel)?;
        write_image(img, &path)?;
        Ok(())
    }

    pub fn gray(&mut self, rel: &str, img: &GrayImage) -> Result<()> {
        let path = self.prepare(rel)?;
        write_gray(img, &path)?;
        Ok(())
    }

    /// Deletes everything written through this tree.
    pub fn discard(&mut self) {
        for rel in self.written.drain(..).rev() {
            let _ = fs::remove_file(self.root.join(&rel));
        }
    }
}
