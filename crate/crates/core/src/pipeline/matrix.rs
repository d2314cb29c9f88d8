//! Columnar text output: a header of feature names plus `label`, then one
//! comma-separated row per vector.

use std::io::{self, Write};

use super::features::{LabeledVector, FEATURE_NAMES};

pub fn write_feature_matrix<W: Write>(rows: &[LabeledVector], mut out: W) -> io::Result<()> {
    writeln!(out, "{},label", FEATURE_NAMES.join(","))?;
    for row in rows {
        for v in row.features.0 {
            write!(out, "{v},")?;
        }
        writeln!(out, "{}", row.label)?;
    }
    out.flush()
}
