use serde::{Deserialize, Serialize};

use super::{EdgeCoefficientTable, GluingWeights, VertexClassification};

/// CSV of one or more tables, one row per level.
pub fn tables_to_csv(tables: &[EdgeCoefficientTable]) -> Result<String, csv::Error> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "edge", "z", "volume", "v", "h", "b_hat", "beta_hat", "a_bar", "b_bar", "beta_bar", "volume_se", "v_se", "h_se",
        "b_hat_se", "beta_hat_se",
    ])?;
    for t in tables {
        for r in &t.rows {
            let vals = [
                r.z, r.volume, r.v, r.h, r.b_hat, r.beta_hat, r.a_bar, r.b_bar, r.beta_bar, r.volume_se, r.v_se, r.h_se,
                r.b_hat_se, r.beta_hat_se,
            ];
            let mut rec = vec![t.edge.to_string()];
            rec.extend(vals.iter().map(|v| format!("{v:e}")));
            w.write_record(&rec)?;
        }
    }
    let bytes = w.into_inner().map_err(|e| e.into_error())?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// JSON companion to the CSV tables.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CoefficientSidecar {
    pub gluing: Vec<GluingWeights>,
    pub classifications: Vec<VertexClassification>,
}

impl CoefficientSidecar {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("sidecar serializes")
    }
}
