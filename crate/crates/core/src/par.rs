//! Mapping over sample points, data-parallel when the `parallel` feature is on.
//!
//! Results always come back in input order, so reports do not depend on
//! scheduling.

/// Sequential map over points.
pub fn map_seq<T, F>(points: &[Vec<f64>], f: F) -> Vec<T>
where
    F: Fn(&[f64]) -> T,
{
    points.iter().map(|p| f(p)).collect()
}

/// Rayon map over points.
#[cfg(feature = "parallel")]
pub fn map_rayon<T, F>(points: &[Vec<f64>], f: F) -> Vec<T>
where
    T: Send,
    F: Fn(&[f64]) -> T + Sync + Send,
{
    use rayon::prelude::*;
    points.par_iter().map(|p| f(p)).collect()
}

/// Map with the backend selected at compile time.
pub fn map_points<T, F>(points: &[Vec<f64>], f: F) -> Vec<T>
where
    T: Send,
    F: Fn(&[f64]) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        map_rayon(points, f)
    }
    #[cfg(not(feature = "parallel"))]
    {
        map_seq(points, f)
    }
}

/// Fallible map; returns the first error in input order.
pub fn try_map_points<T, E, F>(points: &[Vec<f64>], f: F) -> Result<Vec<T>, E>
where
    T: Send,
    E: Send,
    F: Fn(&[f64]) -> Result<T, E> + Sync + Send,
{
    map_points(points, f).into_iter().collect()
}
