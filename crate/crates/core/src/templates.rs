//! Prompt templates as versioned text files with named placeholders.
//!
//! The bundled v1 templates are compiled in; a directory of replacement
//! files can be loaded so template swaps stay auditable (the set reports a
//! digest over all active templates, which run manifests record).

use std::collections::BTreeMap;
use std::path::Path;

#[derive(Debug, thiserror::Error)]
pub enum TemplateError {
    #[error("unknown template {0}")]
    Unknown(String),
    #[error("template {name} is missing placeholder {placeholder}")]
    MissingPlaceholder { name: String, placeholder: String },
    #[error("cannot read template dir: {0}")]
    Io(#[from] std::io::Error),
}

/// Template names and the placeholders each must contain.
const REQUIRED: &[(&str, &[&str])] = &[
    ("instruction_classifier", &["{instruction}"]),
    ("claim_classifier", &["{instruction}", "{sentence}"]),
    ("fact_check", &["{supports}", "{claim}"]),
    ("judge", &["{instruction}", "{response}"]),
    ("decompose", &["{sentence}"]),
    ("rerank", &["{query}", "{passage}"]),
];

/// The active set of prompt templates.
#[derive(Debug, Clone)]
pub struct TemplateSet {
    version: String,
    bodies: BTreeMap<String, String>,
}

impl TemplateSet {
    /// The compiled-in v1 templates.
    pub fn bundled() -> Self {
        let mut bodies = BTreeMap::new();
        bodies.insert(
            "instruction_classifier".to_string(),
            include_str!("../templates/instruction_classifier_v1.txt").to_string(),
        );
        bodies.insert(
            "claim_classifier".to_string(),
            include_str!("../templates/claim_classifier_v1.txt").to_string(),
        );
        bodies.insert(
            "fact_check".to_string(),
            include_str!("../templates/fact_check_v1.txt").to_string(),
        );
        bodies.insert("judge".to_string(), include_str!("../templates/judge_v1.txt").to_string());
        bodies.insert(
            "decompose".to_string(),
            include_str!("../templates/decompose_v1.txt").to_string(),
        );
        bodies.insert("rerank".to_string(), include_str!("../templates/rerank_v1.txt").to_string());
        TemplateSet { version: "v1".to_string(), bodies }
    }

    /// Load `<name>_<version>.txt` files from a directory, replacing bundled
    /// bodies for any name present there.
    pub fn load_dir(dir: &Path) -> Result<Self, TemplateError> {
        let mut set = Self::bundled();
        let mut versions = vec![set.version.clone()];
        for entry in std::fs::read_dir(dir)? {
            let path = entry?.path();
            let Some(stem) = path.file_stem().and_then(|s| s.to_str()) else { continue };
            if path.extension().and_then(|e| e.to_str()) != Some("txt") {
                continue;
            }
            let Some((name, version)) = stem.rsplit_once('_') else { continue };
            if set.bodies.contains_key(name) {
                set.bodies.insert(name.to_string(), std::fs::read_to_string(&path)?);
                versions.push(format!("{name}:{version}"));
            }
        }
        versions.sort();
        set.version = versions.join(",");
        set.check()?;
        Ok(set)
    }

    fn check(&self) -> Result<(), TemplateError> {
        for (name, placeholders) in REQUIRED {
            let body = self
                .bodies
                .get(*name)
                .ok_or_else(|| TemplateError::Unknown((*name).to_string()))?;
            for placeholder in *placeholders {
                if !body.contains(placeholder) {
                    return Err(TemplateError::MissingPlaceholder {
                        name: (*name).to_string(),
                        placeholder: (*placeholder).to_string(),
                    });
                }
            }
        }
        Ok(())
    }

    pub fn version(&self) -> &str {
        &self.version
    }

    /// Digest over all active template bodies; recorded in run manifests.
    pub fn digest(&self) -> String {
        let fields: Vec<String> =
            self.bodies.iter().map(|(name, body)| format!("{name}\u{1f}{body}")).collect();
        let refs: Vec<&str> = fields.iter().map(|s| s.as_str()).collect();
        crate::digest::tagged_digest("templates.v1", &refs)
    }

    /// Substitute named placeholders into a template.
    pub fn render(&self, name: &str, vars: &[(&str, &str)]) -> Result<String, TemplateError> {
        let body =
            self.bodies.get(name).ok_or_else(|| TemplateError::Unknown(name.to_string()))?;
        let mut out = body.clone();
        for (key, value) in vars {
            out = out.replace(&format!("{{{key}}}"), value);
        }
        Ok(out)
    }
}

impl Default for TemplateSet {
    fn default() -> Self {
        Self::bundled()
    }
}
