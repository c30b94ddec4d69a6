use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::jsonio;

/// The eight broadcast genres used when no other list is declared.
pub const DEFAULT_GENRES: [&str; 8] = [
    "Advice",
    "Children's",
    "Comedy",
    "Competition",
    "Documentary",
    "Drama",
    "Events",
    "News",
];

pub fn default_genres() -> Vec<String> {
    DEFAULT_GENRES.iter().map(|g| g.to_string()).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShowRecord {
    pub id: String,
    pub genre: String,
    pub split: Split,
    pub feat_path: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lab_path: Option<PathBuf>,
}

/// An ordered list of shows, stored on disk as a JSON array of [`ShowRecord`]s.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CorpusManifest {
    genres: Vec<String>,
    shows: Vec<ShowRecord>,
}

impl CorpusManifest {
    /// Validates unique ids and genres drawn from `genres`.
    pub fn new(genres: Vec<String>, shows: Vec<ShowRecord>) -> Result<Self> {
        let declared: BTreeSet<&str> = genres.iter().map(String::as_str).collect();
        if declared.len() != genres.len() {
            return Err(Error::Validation("genre list contains duplicates".into()));
        }
        let mut seen = BTreeSet::new();
        for show in &shows {
            if !seen.insert(show.id.as_str()) {
                return Err(Error::Validation(format!("duplicate show id `{}`", show.id)));
            }
            if !declared.contains(show.genre.as_str()) {
                return Err(Error::Validation(format!(
                    "show `{}` has unknown genre `{}`",
                    show.id, show.genre
                )));
            }
        }
        Ok(Self { genres, shows })
    }

    pub fn with_default_genres(shows: Vec<ShowRecord>) -> Result<Self> {
        Self::new(default_genres(), shows)
    }

    pub fn genres(&self) -> &[String] {
        &self.genres
    }

    pub fn shows(&self) -> &[ShowRecord] {
        &self.shows
    }

    pub fn split(&self, split: Split) -> impl Iterator<Item = &ShowRecord> {
        self.shows.iter().filter(move |s| s.split == split)
    }

    pub fn get(&self, id: &str) -> Option<&ShowRecord> {
        self.shows.iter().find(|s| s.id == id)
    }

    /// Loads against the default genre list.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::load_with_genres(path, default_genres())
    }

    /// Relative paths in the file are resolved against the manifest's directory.
    pub fn load_with_genres(path: impl AsRef<Path>, genres: Vec<String>) -> Result<Self> {
        let path = path.as_ref();
        let mut shows: Vec<ShowRecord> = jsonio::read_json(path)?;
        let base = path.parent().unwrap_or(Path::new(""));
        for show in &mut shows {
            show.feat_path = resolve(base, &show.feat_path);
            show.lab_path = show.lab_path.as_deref().map(|p| resolve(base, p));
        }
        Self::new(genres, shows)
    }

    /// Paths under the manifest's directory are written relative to it, so
    /// that load → save → load is the identity.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let base = path.parent().unwrap_or(Path::new(""));
        let shows: Vec<ShowRecord> = self
            .shows
            .iter()
            .map(|s| ShowRecord {
                feat_path: relativize(base, &s.feat_path),
                lab_path: s.lab_path.as_deref().map(|p| relativize(base, p)),
                ..s.clone()
            })
            .collect();
        jsonio::write_json(path, &shows)
    }
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

fn relativize(base: &Path, p: &Path) -> PathBuf {
    if base.as_os_str().is_empty() {
        return p.to_path_buf();
    }
    p.strip_prefix(base).map(Path::to_path_buf).unwrap_or_else(|_| p.to_path_buf())
}
