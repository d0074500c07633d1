//! JSON model documents: named matrices as row-major nested arrays.

use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{ScheduleEntry, StateSpaceModel};
use crate::error::{Error, Result};

type Rows = Vec<Vec<f64>>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduleDocument {
    pub t_start: f64,
    #[serde(rename = "C")]
    pub c: Rows,
    #[serde(rename = "D")]
    pub d: Rows,
    #[serde(rename = "V", default, skip_serializing_if = "Option::is_none")]
    pub v: Option<Rows>,
    #[serde(rename = "M", default, skip_serializing_if = "Option::is_none")]
    pub m: Option<Rows>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[allow(non_snake_case)]
pub struct ModelDocument {
    pub n: usize,
    pub p: usize,
    pub m: usize,
    pub q: usize,
    pub A: Rows,
    pub B: Rows,
    pub C: Rows,
    pub D: Rows,
    pub L: Rows,
    pub W: Rows,
    pub V: Rows,
    pub M: Rows,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schedule: Option<Vec<ScheduleDocument>>,
}

fn to_rows(m: &DMatrix<f64>) -> Rows {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn from_rows(name: &str, rows: &Rows, nrows: usize, ncols: usize) -> Result<DMatrix<f64>> {
    if rows.len() != nrows {
        return Err(Error::Format(format!(
            "{name}: {} rows, expected {nrows}",
            rows.len()
        )));
    }
    let mut out = DMatrix::zeros(nrows, ncols);
    for (i, r) in rows.iter().enumerate() {
        if r.len() != ncols {
            return Err(Error::Format(format!(
                "{name}: row {i} has {} entries, expected {ncols}",
                r.len()
            )));
        }
        for (j, &v) in r.iter().enumerate() {
            out[(i, j)] = v;
        }
    }
    Ok(out)
}

impl ModelDocument {
    pub fn from_model(model: &StateSpaceModel) -> Self {
        Self {
            n: model.n(),
            p: model.p(),
            m: model.m_out(),
            q: model.q(),
            A: to_rows(model.a()),
            B: to_rows(model.b()),
            C: to_rows(model.c()),
            D: to_rows(model.d()),
            L: to_rows(model.l()),
            W: to_rows(model.w()),
            V: to_rows(model.v()),
            M: to_rows(model.m()),
            schedule: model.schedule().map(|s| {
                s.iter()
                    .map(|e| ScheduleDocument {
                        t_start: e.t_start,
                        c: to_rows(&e.c),
                        d: to_rows(&e.d),
                        v: e.v.as_ref().map(to_rows),
                        m: e.m.as_ref().map(to_rows),
                    })
                    .collect()
            }),
        }
    }

    pub fn to_model(&self) -> Result<StateSpaceModel> {
        let (n, p, m, q) = (self.n, self.p, self.m, self.q);
        let model = StateSpaceModel::new(
            from_rows("A", &self.A, n, n)?,
            from_rows("B", &self.B, n, p)?,
            from_rows("C", &self.C, m, n)?,
            from_rows("D", &self.D, m, p)?,
            from_rows("L", &self.L, n, q)?,
            from_rows("W", &self.W, q, q)?,
            from_rows("V", &self.V, m, m)?,
            from_rows("M", &self.M, q, m)?,
        )?;
        let Some(schedule) = &self.schedule else {
            return Ok(model);
        };
        let entries = schedule
            .iter()
            .enumerate()
            .map(|(k, e)| {
                Ok(ScheduleEntry {
                    t_start: e.t_start,
                    c: from_rows(&format!("schedule[{k}].C"), &e.c, m, n)?,
                    d: from_rows(&format!("schedule[{k}].D"), &e.d, m, p)?,
                    v: e
                        .v
                        .as_ref()
                        .map(|v| from_rows(&format!("schedule[{k}].V"), v, m, m))
                        .transpose()?,
                    m: e
                        .m
                        .as_ref()
                        .map(|x| from_rows(&format!("schedule[{k}].M"), x, q, m))
                        .transpose()?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        model.with_schedule(entries)
    }
}

impl StateSpaceModel {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&ModelDocument::from_model(self))
            .expect("model document serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: ModelDocument = serde_json::from_str(text)?;
        doc.to_model()
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dmatrix;

    #[test]
    fn round_trip_is_exact() {
        let s = StateSpaceModel::new(
            dmatrix![-0.1, 1.0 / 3.0; -1e-300, -2.5e7],
            DMatrix::zeros(2, 0),
            dmatrix![std::f64::consts::PI, 0.0],
            DMatrix::zeros(1, 0),
            dmatrix![0.0; 1.0],
            dmatrix![4.891e6 + 0.5],
            dmatrix![0.5],
            dmatrix![0.1],
        )
        .unwrap()
        .with_schedule(vec![ScheduleEntry {
            t_start: 1e-6,
            c: dmatrix![0.0, 1.0],
            d: DMatrix::zeros(1, 0),
            v: None,
            m: Some(dmatrix![0.2]),
        }])
        .unwrap();
        let text = s.to_json();
        assert!(text.contains("\"schedule\""));
        let back = StateSpaceModel::from_json(&text).unwrap();
        assert_eq!(back, s);
        assert_eq!(back.fingerprint(), s.fingerprint());
    }

    #[test]
    fn wrong_row_length_is_reported() {
        let text = r#"{"n":1,"p":0,"m":1,"q":0,"A":[[1.0,2.0]],"B":[[]],"C":[[1.0]],
            "D":[[]],"L":[[]],"W":[],"V":[[1.0]],"M":[]}"#;
        let err = StateSpaceModel::from_json(text).unwrap_err();
        assert!(err.to_string().contains("A: row 0"));
    }
}
