//! The bundled annual comparison table (actual consumption and three model
//! predictions, 2007 to 2031, million liters per day).

use gasfc_core::data::{ReferenceRow, ReferenceSeries};

const REFERENCE_CSV: &str = include_str!("../data/reference_annual.csv");

/// Parses the bundled table. The file is compiled in, so a parse failure is
/// a build defect and panics.
pub fn reference_series() -> ReferenceSeries {
    let mut rdr = csv::Reader::from_reader(REFERENCE_CSV.as_bytes());
    let num = |s: &str| s.parse::<f64>().expect("bundled reference value");
    let rows = rdr
        .records()
        .map(|r| {
            let r = r.expect("bundled reference row");
            ReferenceRow {
                year: r[0].parse().expect("bundled reference year"),
                actual: (!r[1].is_empty()).then(|| num(&r[1])),
                ann: num(&r[2]),
                regression: num(&r[3]),
                hybrid: num(&r[4]),
            }
        })
        .collect();
    ReferenceSeries { rows }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shape_of_bundled_table() {
        let s = reference_series();
        assert_eq!(s.rows.len(), 25);
        assert_eq!(s.rows[0].year, 2007);
        assert_eq!(s.rows[24].year, 2031);
        assert_eq!(s.actuals().len(), 15);
        assert!(s.get(2022).unwrap().actual.is_none());
        assert!(s.rows.windows(2).all(|w| w[1].year == w[0].year + 1));
    }
}
