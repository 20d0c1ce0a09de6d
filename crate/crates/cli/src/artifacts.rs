//! JSON artifacts shared between CLI stages.

use std::io::BufReader;
use std::path::Path;

use lcc_core::models::Model;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

/// A trained global model with the label table it was trained on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelArtifact {
    pub label_names: Vec<String>,
    pub model: Model,
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let file = std::fs::File::open(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_reader(BufReader::new(file)).map_err(|e| CliError::Parse {
        line: e.line(),
        message: format!("{}: {e}", path.display()),
    })
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).expect("artifacts serialize");
    std::fs::write(path, text + "\n").map_err(|e| CliError::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use lcc_core::models::{train_nearest_centroid, ScoringModel};
    use lcc_core::LabeledDataset;

    #[test]
    fn model_artifact_round_trip() {
        let ds = LabeledDataset::new(
            vec![vec![0.0, 1.0], vec![2.0, 3.0]],
            vec![0, 1],
            vec!["a".into(), "b".into()],
        )
        .unwrap();
        let artifact = ModelArtifact {
            label_names: ds.label_names().to_vec(),
            model: Model::NearestCentroid(train_nearest_centroid(&ds, 0.7).unwrap()),
        };
        let dir = std::env::temp_dir().join(format!("lcc-artifact-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("model.json");
        write_json(&path, &artifact).unwrap();
        let back: ModelArtifact = read_json(&path).unwrap();
        assert_eq!(back, artifact);
        assert_eq!(back.model.class_count(), 2);
        std::fs::remove_dir_all(dir).unwrap();
    }
}
