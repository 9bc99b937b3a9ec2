//! Data ingestion, centring and per-model least-squares statistics.

use std::fs::File;
use std::io::{BufReader, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::modelspace::ModelId;

/// Singular values below this fraction of the largest declare rank deficiency.
pub const RANK_TOLERANCE: f64 = 1e-10;

#[derive(Clone, Debug)]
pub struct Dataset {
    pub y: DVector<f64>,
    pub x: DMatrix<f64>,
    pub names: Vec<String>,
    pub response_name: String,
    pub centred: bool,
    /// Amount subtracted from each column so far (zeros before centring).
    pub column_means: Vec<f64>,
    /// Columns with zero spread, kept but flagged.
    pub constant_columns: Vec<usize>,
}

impl Dataset {
    pub fn new(y: DVector<f64>, x: DMatrix<f64>, names: Vec<String>) -> Result<Self> {
        let (n, p) = x.shape();
        if y.len() != n {
            return Err(Error::InvalidData(format!(
                "response has {} rows but covariates have {n}",
                y.len()
            )));
        }
        if n < 2 || p < 1 {
            return Err(Error::InvalidData(format!(
                "need n >= 2 and p >= 1, got n = {n}, p = {p}"
            )));
        }
        if names.len() != p {
            return Err(Error::InvalidData(format!("{} names for {p} columns", names.len())));
        }
        if y.iter().chain(x.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidData("non-finite entry".into()));
        }
        let constant_columns = (0..p)
            .filter(|&j| {
                let c = x.column(j);
                c.iter().all(|&v| v == c[0])
            })
            .collect();
        Ok(Dataset {
            y,
            x,
            names,
            response_name: "y".into(),
            centred: false,
            column_means: vec![0.0; p],
            constant_columns,
        })
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    /// Keep only the listed covariate columns, in the given order.
    pub fn select_columns(&self, cols: &[usize]) -> Result<Dataset> {
        let x = self.x.select_columns(cols);
        let names = cols.iter().map(|&j| self.names[j].clone()).collect();
        let mut ds = Dataset::new(self.y.clone(), x, names)?;
        ds.response_name = self.response_name.clone();
        ds.centred = self.centred;
        ds.column_means = cols.iter().map(|&j| self.column_means[j]).collect();
        Ok(ds)
    }

    pub fn select_rows(&self, rows: &[usize]) -> Result<Dataset> {
        let y = DVector::from_iterator(rows.len(), rows.iter().map(|&i| self.y[i]));
        let x = self.x.select_rows(rows);
        let mut ds = Dataset::new(y, x, self.names.clone())?;
        ds.response_name = self.response_name.clone();
        ds.column_means = self.column_means.clone();
        Ok(ds)
    }

    /// Centre rows of new covariate values with this dataset's column means.
    pub fn centre_new(&self, x_new: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if x_new.ncols() != self.p() {
            return Err(Error::InvalidData(format!(
                "new covariates have {} columns, training data has {}",
                x_new.ncols(),
                self.p()
            )));
        }
        let mut out = x_new.clone();
        for (j, mut col) in out.column_iter_mut().enumerate() {
            col.add_scalar_mut(-self.column_means[j]);
        }
        Ok(out)
    }
}

/// Read a CSV file with a header row; `response` names the y column and all
/// remaining columns become covariates.
pub fn load_csv(path: impl AsRef<Path>, response: &str) -> Result<Dataset> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(BufReader::new(file));
    let headers: Vec<String> = rdr.headers()?.iter().map(str::to_owned).collect();
    let ycol = headers
        .iter()
        .position(|h| h == response)
        .ok_or_else(|| Error::MissingColumn(response.to_owned()))?;
    let mut ys = Vec::new();
    let mut xs = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        if rec.len() != headers.len() {
            return Err(Error::InvalidData(format!(
                "row {} has {} fields, header has {}",
                i + 1,
                rec.len(),
                headers.len()
            )));
        }
        for (j, cell) in rec.iter().enumerate() {
            let v: f64 = cell
                .parse()
                .ok()
                .filter(|v: &f64| v.is_finite())
                .ok_or_else(|| Error::NonNumeric {
                    row: i + 1,
                    column: headers[j].clone(),
                    value: cell.to_owned(),
                })?;
            if j == ycol {
                ys.push(v);
            } else {
                xs.push(v);
            }
        }
    }
    let n = ys.len();
    let p = headers.len() - 1;
    let names = headers
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != ycol)
        .map(|(_, h)| h.clone())
        .collect();
    let x = DMatrix::from_row_slice(n, p, &xs);
    let mut ds = Dataset::new(DVector::from_vec(ys), x, names)?;
    ds.response_name = response.to_owned();
    Ok(ds)
}

/// Write the response first, then the covariates. Values use the shortest
/// representation that parses back to the same `f64`.
pub fn write_csv(ds: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let f = File::create(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    write_csv_to(ds, std::io::BufWriter::new(f)).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// [`write_csv`] into any writer.
pub fn write_csv_to<W: Write>(ds: &Dataset, mut out: W) -> std::io::Result<()> {
    let mut line = ds.response_name.clone();
    for name in &ds.names {
        line.push(',');
        line.push_str(name);
    }
    writeln!(out, "{line}")?;
    for i in 0..ds.n() {
        line.clear();
        line.push_str(&ds.y[i].to_string());
        for j in 0..ds.p() {
            line.push(',');
            line.push_str(&ds.x[(i, j)].to_string());
        }
        writeln!(out, "{line}")?;
    }
    out.flush()
}

/// Subtract each covariate's sample mean; the response is untouched.
pub fn centre(ds: &Dataset) -> Dataset {
    let mut out = ds.clone();
    let n = ds.n() as f64;
    for (j, mut col) in out.x.column_iter_mut().enumerate() {
        let m = col.sum() / n;
        col.add_scalar_mut(-m);
        out.column_means[j] += m;
    }
    out.centred = true;
    out
}

/// Reference model: an intercept plus optional covariates present in every model.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Reference {
    pub fixed_columns: Vec<usize>,
}

impl Reference {
    pub fn intercept_only() -> Self {
        Reference::default()
    }
}

/// Least-squares solution through the SVD with the crate's rank rule.
fn lstsq(x: &DMatrix<f64>, y: &DVector<f64>) -> Result<DVector<f64>> {
    let cols = x.ncols();
    if cols == 0 {
        return Ok(DVector::zeros(0));
    }
    if x.nrows() <= cols {
        return Err(Error::RankDeficient {
            rank: x.nrows().min(cols),
            cols,
        });
    }
    let svd = x.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let rank = svd
        .singular_values
        .iter()
        .filter(|&&s| s > RANK_TOLERANCE * smax)
        .count();
    if rank < cols || smax == 0.0 {
        return Err(Error::RankDeficient { rank, cols });
    }
    let u = svd.u.as_ref().expect("u requested");
    let vt = svd.v_t.as_ref().expect("v_t requested");
    let mut c = u.transpose() * y;
    for (ci, s) in c.iter_mut().zip(svd.singular_values.iter()) {
        *ci /= s;
    }
    Ok(vt.transpose() * c)
}

/// The dataset split into reference columns and candidate covariates, with
/// quantities shared by every model precomputed.
#[derive(Clone, Debug)]
pub struct Design {
    pub y: DVector<f64>,
    /// `n × k0`: intercept then any fixed reference covariates.
    pub x0: DMatrix<f64>,
    /// `n × p`: candidate covariates.
    pub xc: DMatrix<f64>,
    pub candidate_names: Vec<String>,
    pub reference_names: Vec<String>,
    /// Dataset column index of each candidate.
    pub candidate_columns: Vec<usize>,
    pub reference: Reference,
    pub beta0_hat: DVector<f64>,
    pub rss0: f64,
    pub tss: f64,
    /// `Xcᵀ(I − P0)Xc`.
    pub gram_resid: DMatrix<f64>,
    /// `Xcᵀ(I − P0)y`.
    pub xty_resid: DVector<f64>,
}

impl Design {
    pub fn new(ds: &Dataset, reference: &Reference) -> Result<Self> {
        let (n, p_all) = ds.x.shape();
        for &j in &reference.fixed_columns {
            if j >= p_all {
                return Err(Error::Config(format!("reference column {j} out of range")));
            }
        }
        let candidate_columns: Vec<usize> = (0..p_all)
            .filter(|j| !reference.fixed_columns.contains(j))
            .collect();
        if candidate_columns.is_empty() {
            return Err(Error::Config("no candidate covariates left".into()));
        }
        let k0 = 1 + reference.fixed_columns.len();
        let mut x0 = DMatrix::from_element(n, k0, 1.0);
        for (c, &j) in reference.fixed_columns.iter().enumerate() {
            x0.set_column(c + 1, &ds.x.column(j));
        }
        let xc = ds.x.select_columns(&candidate_columns);
        let beta0_hat = lstsq(&x0, &ds.y)?;
        let r0 = &ds.y - &x0 * &beta0_hat;
        let rss0 = r0.norm_squared();
        let ybar = ds.y.mean();
        let tss = ds.y.iter().map(|v| (v - ybar).powi(2)).sum();

        // Residualize candidates on X0 column by column.
        let mut xr = xc.clone();
        for mut col in xr.column_iter_mut() {
            let b = lstsq(&x0, &col.clone_owned())?;
            col -= &x0 * b;
        }
        let gram_resid = xr.transpose() * &xr;
        let xty_resid = xr.transpose() * &r0;

        let mut reference_names = vec!["(Intercept)".to_owned()];
        reference_names.extend(reference.fixed_columns.iter().map(|&j| ds.names[j].clone()));
        Ok(Design {
            y: ds.y.clone(),
            x0,
            candidate_names: candidate_columns.iter().map(|&j| ds.names[j].clone()).collect(),
            xc,
            reference_names,
            candidate_columns,
            reference: reference.clone(),
            beta0_hat,
            rss0,
            tss,
            gram_resid,
            xty_resid,
        })
    }

    pub fn intercept_only(ds: &Dataset) -> Result<Self> {
        Self::new(ds, &Reference::intercept_only())
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn k0(&self) -> usize {
        self.x0.ncols()
    }

    /// Number of candidate covariates.
    pub fn p(&self) -> usize {
        self.xc.ncols()
    }

    pub fn xe(&self, m: &ModelId) -> DMatrix<f64> {
        self.xc.select_columns(&m.indices())
    }

    /// `[X0 | Xe]`.
    pub fn x1(&self, m: &ModelId) -> DMatrix<f64> {
        let idx = m.indices();
        let k0 = self.k0();
        let mut x1 = DMatrix::zeros(self.n(), k0 + idx.len());
        x1.columns_mut(0, k0).copy_from(&self.x0);
        for (c, &j) in idx.iter().enumerate() {
            x1.set_column(k0 + c, &self.xc.column(j));
        }
        x1
    }

    fn check(&self, m: &ModelId) -> Result<()> {
        if m.p() != self.p() {
            return Err(Error::Config(format!(
                "model has {} indicators, design has {} candidates",
                m.p(),
                self.p()
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct OlsStats {
    /// `[β0; βe]`, length `k1`.
    pub beta_hat: Vec<f64>,
    pub rss: f64,
    pub rss0: f64,
    pub tss: f64,
    pub r2: f64,
    /// `rss / rss0`, i.e. `(1 − R1²)/(1 − R0²)`.
    pub r10: f64,
    pub n: usize,
    pub k0: usize,
    pub k1: usize,
    /// Total number of candidate covariates.
    pub p_total: usize,
}

impl OlsStats {
    pub fn ke(&self) -> usize {
        self.k1 - self.k0
    }
}

pub fn ols_stats(design: &Design, m: &ModelId) -> Result<OlsStats> {
    design.check(m)?;
    let x1 = design.x1(m);
    let k1 = x1.ncols();
    let beta = lstsq(&x1, &design.y)?;
    let rss = if m.size() == 0 {
        design.rss0
    } else {
        (&design.y - &x1 * &beta).norm_squared()
    };
    Ok(OlsStats {
        beta_hat: beta.iter().copied().collect(),
        rss,
        rss0: design.rss0,
        tss: design.tss,
        r2: if design.tss > 0.0 { 1.0 - rss / design.tss } else { 0.0 },
        r10: if design.rss0 > 0.0 { rss / design.rss0 } else { 1.0 },
        n: design.n(),
        k0: design.k0(),
        k1,
        p_total: design.p(),
    })
}

/// `Xeᵀ(I − P0)Xe` for the model's included covariates.
pub fn ve_inverse(design: &Design, m: &ModelId) -> Result<DMatrix<f64>> {
    design.check(m)?;
    let idx = m.indices();
    let v = design.gram_resid.select_rows(&idx).select_columns(&idx);
    if !idx.is_empty() {
        let eig = v.clone().symmetric_eigen();
        let max = eig.eigenvalues.max();
        let min = eig.eigenvalues.min();
        // Eigenvalues are squared singular values, hence the squared tolerance.
        if !(max > 0.0) || min <= RANK_TOLERANCE * RANK_TOLERANCE * max {
            let rank = eig
                .eigenvalues
                .iter()
                .filter(|&&e| e > RANK_TOLERANCE * RANK_TOLERANCE * max)
                .count();
            return Err(Error::RankDeficient {
                rank,
                cols: idx.len(),
            });
        }
    }
    Ok(v)
}

/// Everything the full conditionals of a fixed model need.
#[derive(Clone, Debug)]
pub struct ModelMatrices {
    pub model: ModelId,
    pub y: DVector<f64>,
    pub x0: DMatrix<f64>,
    pub xe: DMatrix<f64>,
    pub ve_inv: DMatrix<f64>,
    /// `X1ᵀX1` with `X1 = [X0 | Xe]`.
    pub x1tx1: DMatrix<f64>,
}

impl ModelMatrices {
    pub fn new(design: &Design, m: &ModelId) -> Result<Self> {
        let ve_inv = ve_inverse(design, m)?;
        let x1 = design.x1(m);
        Ok(ModelMatrices {
            model: m.clone(),
            y: design.y.clone(),
            x0: design.x0.clone(),
            xe: design.xe(m),
            ve_inv,
            x1tx1: x1.transpose() * &x1,
        })
    }

    pub fn k0(&self) -> usize {
        self.x0.ncols()
    }

    pub fn ke(&self) -> usize {
        self.xe.ncols()
    }

    pub fn x1(&self) -> DMatrix<f64> {
        let mut x1 = DMatrix::zeros(self.y.len(), self.k0() + self.ke());
        x1.columns_mut(0, self.k0()).copy_from(&self.x0);
        x1.columns_mut(self.k0(), self.ke()).copy_from(&self.xe);
        x1
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> Dataset {
        let x = DMatrix::from_row_slice(
            6,
            2,
            &[1.0, 0.5, 2.0, -1.0, 3.0, 2.5, 4.0, 0.0, 5.0, 1.5, 6.0, -2.0],
        );
        let y = DVector::from_vec(vec![1.2, 2.1, 3.3, 3.9, 5.2, 5.8]);
        Dataset::new(y, x, vec!["a".into(), "b".into()]).unwrap()
    }

    #[test]
    fn centring() {
        let ds = Dataset::new(
            DVector::from_vec(vec![0.0, 1.0, 2.0]),
            DMatrix::from_column_slice(3, 1, &[1.0, 2.0, 3.0]),
            vec!["x".into()],
        )
        .unwrap();
        let c = centre(&ds);
        assert_eq!(c.x.as_slice(), &[-1.0, 0.0, 1.0]);
        assert_eq!(c.column_means, vec![2.0]);
        let cc = centre(&c);
        assert!((cc.x.clone() - c.x.clone()).abs().max() < 1e-12);
        assert_eq!(cc.column_means, vec![2.0]);
    }

    #[test]
    fn null_model_stats() {
        let d = Design::intercept_only(&toy()).unwrap();
        let s = ols_stats(&d, &ModelId::empty(2)).unwrap();
        assert_eq!(s.r10, 1.0);
        assert!(s.r2.abs() < 1e-12);
        assert_eq!(s.k1, 1);
    }

    #[test]
    fn perfect_fit() {
        let ds = toy();
        let y = DVector::from_iterator(6, (0..6).map(|i| 1.0 + 2.0 * ds.x[(i, 0)] - ds.x[(i, 1)]));
        let ds = Dataset::new(y, ds.x.clone(), ds.names.clone()).unwrap();
        let d = Design::intercept_only(&ds).unwrap();
        let s = ols_stats(&d, &ModelId::full(2)).unwrap();
        assert!(s.rss < 1e-20);
        assert!((s.r2 - 1.0).abs() < 1e-12);
        assert!((s.beta_hat[1] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn rank_deficiency_detected() {
        let ds = toy();
        let mut x = DMatrix::zeros(6, 3);
        x.columns_mut(0, 2).copy_from(&ds.x);
        let dup = ds.x.column(0) * 2.0;
        x.set_column(2, &dup);
        let ds = Dataset::new(ds.y.clone(), x, vec!["a".into(), "b".into(), "c".into()]).unwrap();
        let d = Design::intercept_only(&ds).unwrap();
        let m = ModelId::from_indices(3, &[0, 2]);
        assert!(matches!(ols_stats(&d, &m), Err(Error::RankDeficient { .. })));
        assert!(matches!(ve_inverse(&d, &m), Err(Error::RankDeficient { .. })));
    }

    #[test]
    fn ve_inverse_centred_equals_gram() {
        let ds = centre(&toy());
        let d = Design::intercept_only(&ds).unwrap();
        let m = ModelId::full(2);
        let v = ve_inverse(&d, &m).unwrap();
        let xe = d.xe(&m);
        assert!((v - xe.transpose() * &xe).abs().max() < 1e-12);
    }

    #[test]
    fn fixed_reference_columns() {
        let ds = toy();
        let d = Design::new(&ds, &Reference { fixed_columns: vec![1] }).unwrap();
        assert_eq!(d.k0(), 2);
        assert_eq!(d.p(), 1);
        assert_eq!(d.candidate_names, vec!["a".to_string()]);
        let s = ols_stats(&d, &ModelId::empty(1)).unwrap();
        assert_eq!(s.k1, 2);
        assert!((s.rss - d.rss0).abs() < 1e-14);
    }
}
