//! Attraction probabilities from a MovieLens ratings file.

use std::collections::BTreeMap;
use std::path::Path;

use serde::Deserialize;

use crate::error::{Error, Result};

#[derive(Deserialize)]
#[serde(rename_all = "camelCase")]
#[allow(dead_code)]
struct Rating {
    user_id: u64,
    movie_id: u64,
    rating: f64,
    timestamp: i64,
}

/// Means of the `num_items` most-rated movies, most-rated first (ties to the
/// smaller movie id). A movie's mean is the fraction of its ratings at or
/// above `threshold`.
pub fn ingest_movielens(path: &Path, num_items: usize, threshold: f64) -> Result<Vec<f64>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;
    let header = reader.headers().map_err(|e| csv_error(path, e))?.clone();
    let expected = ["userId", "movieId", "rating", "timestamp"];
    if header.iter().ne(expected) {
        return Err(Error::Parse {
            path: path.into(),
            line: 1,
            msg: format!("expected header {}", expected.join(",")),
        });
    }
    // movie id -> (ratings, ratings >= threshold)
    let mut counts: BTreeMap<u64, (u64, u64)> = BTreeMap::new();
    let mut record = csv::StringRecord::new();
    while reader
        .read_record(&mut record)
        .map_err(|e| csv_error(path, e))?
    {
        let line = record.position().map_or(0, |p| p.line() as usize);
        let row: Rating = record
            .deserialize(Some(&header))
            .map_err(|e| Error::Parse {
                path: path.into(),
                line,
                msg: e.to_string(),
            })?;
        if !(0.5..=5.0).contains(&row.rating) {
            return Err(Error::Parse {
                path: path.into(),
                line,
                msg: format!("rating {} outside [0.5, 5]", row.rating),
            });
        }
        let c = counts.entry(row.movie_id).or_default();
        c.0 += 1;
        c.1 += u64::from(row.rating >= threshold);
    }
    if counts.len() < num_items {
        return Err(Error::config(format!(
            "{} has {} distinct movies, {num_items} requested",
            path.display(),
            counts.len()
        )));
    }
    let mut movies: Vec<(u64, (u64, u64))> = counts.into_iter().collect();
    movies.sort_by(|a, b| b.1 .0.cmp(&a.1 .0).then(a.0.cmp(&b.0)));
    Ok(movies
        .iter()
        .take(num_items)
        .map(|&(_, (n, liked))| liked as f64 / n as f64)
        .collect())
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
    match e.into_kind() {
        csv::ErrorKind::Io(source) => Error::io(path, source),
        kind => Error::Parse {
            path: path.into(),
            line,
            msg: format!("{kind:?}"),
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn file(body: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        write!(f, "userId,movieId,rating,timestamp\n{body}").unwrap();
        f
    }

    #[test]
    fn toy_means() {
        let f = file("1,7,5,0\n2,7,5,0\n3,7,1,0\n1,3,4.0,0\n");
        let means = ingest_movielens(f.path(), 2, 4.0).unwrap();
        assert!((means[0] - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(means[1], 1.0);
    }

    #[test]
    fn ties_go_to_smaller_id() {
        let f = file("1,9,5,0\n1,4,1,0\n");
        assert_eq!(ingest_movielens(f.path(), 1, 4.0).unwrap(), vec![0.0]);
    }

    #[test]
    fn too_few_movies() {
        let f = file("1,7,5,0\n");
        assert!(matches!(
            ingest_movielens(f.path(), 2, 4.0),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn malformed_row_reports_line() {
        let f = file("1,7,5,0\n1,x,5,0\n");
        match ingest_movielens(f.path(), 1, 4.0) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        let f = file("1,7,5,0\n1,7\n");
        assert!(matches!(
            ingest_movielens(f.path(), 1, 4.0),
            Err(Error::Parse { line: 3, .. })
        ));
        let f = file("1,7,5,0\n1,7,9,0\n");
        assert!(matches!(
            ingest_movielens(f.path(), 1, 4.0),
            Err(Error::Parse { line: 3, .. })
        ));
    }

    #[test]
    fn missing_file_is_io() {
        let err = ingest_movielens(Path::new("/nonexistent/ratings.csv"), 1, 4.0).unwrap_err();
        assert!(matches!(err, Error::Io { .. }));
    }
}
