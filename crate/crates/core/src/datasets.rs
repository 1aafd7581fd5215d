//! Bundled reference data.

use crate::data::{read_matrix, DataMatrix, MatrixFormat};

const IRIS_CSV: &str = include_str!("../data/iris.csv");

/// Fisher's iris measurements: 150 rows named `"<species> <index>"` with the
/// species (1–3) as class tag, and 4 attributes in centimetres.
pub fn iris() -> DataMatrix {
    read_matrix(IRIS_CSV.as_bytes(), MatrixFormat::Csv).expect("bundled iris table is valid")
}

#[cfg(test)]
mod tests {
    #[test]
    fn iris_shape_and_tags() {
        let m = super::iris();
        assert_eq!((m.rows(), m.cols()), (150, 4));
        let tags = m.complete_tags().unwrap();
        for class in 1..=3 {
            assert_eq!(tags.iter().filter(|&&t| t == class).count(), 50);
        }
        assert_eq!(m.row_names()[120], "3 121");
    }
}
