use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use chrono::{Days, NaiveDate};
use serde::{Deserialize, Serialize};

use super::{CovariateClass, Covariate, DateRange, GroupSeries, PanelDataset, StaticCovariate};
use crate::{Error, Result};

/// What a CSV column means.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ColumnRole {
    /// ISO-8601 date.
    Date,
    /// Group identifier.
    Group,
    /// Forecast target.
    Target,
    /// A covariate of the given class; `categories` is set for categorical codes.
    Covariate {
        /// Static / past / future.
        class: CovariateClass,
        /// Cardinality for categorical columns (`Some(0)` means infer).
        categories: Option<usize>,
    },
    /// Column present in the file but not used.
    Ignore,
}

impl ColumnRole {
    fn parse(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.trim().split(':').collect();
        let class = match parts[0] {
            "date" if parts.len() == 1 => return Ok(ColumnRole::Date),
            "group" if parts.len() == 1 => return Ok(ColumnRole::Group),
            "target" if parts.len() == 1 => return Ok(ColumnRole::Target),
            "ignore" if parts.len() == 1 => return Ok(ColumnRole::Ignore),
            "static" => CovariateClass::Static,
            "past" => CovariateClass::Past,
            "future" => CovariateClass::Future,
            _ => return Err(Error::Config(format!("unknown column role '{s}'"))),
        };
        let categories = match parts.get(1..) {
            Some([]) | None => None,
            Some(["categorical"]) => Some(0),
            Some(["categorical", k]) => Some(
                k.parse::<usize>()
                    .ok()
                    .filter(|k| *k > 0)
                    .ok_or_else(|| Error::Config(format!("bad cardinality in role '{s}'")))?,
            ),
            _ => return Err(Error::Config(format!("unknown column role '{s}'"))),
        };
        Ok(ColumnRole::Covariate { class, categories })
    }

    fn render(&self) -> String {
        match self {
            ColumnRole::Date => "date".into(),
            ColumnRole::Group => "group".into(),
            ColumnRole::Target => "target".into(),
            ColumnRole::Ignore => "ignore".into(),
            ColumnRole::Covariate { class, categories } => {
                let c = match class {
                    CovariateClass::Static => "static",
                    CovariateClass::Past => "past",
                    CovariateClass::Future => "future",
                };
                match categories {
                    None => c.to_string(),
                    Some(0) => format!("{c}:categorical"),
                    Some(k) => format!("{c}:categorical:{k}"),
                }
            }
        }
    }
}

/// Mapping from CSV column names to roles, in column order.
///
/// On disk this is a flat key-value text file:
///
/// ```text
/// date = "date"
/// region = "group"
/// non_urgent = "target"
/// resp_share = "past"
/// holiday = "future:categorical:2"
/// ```
#[derive(Debug, Clone, PartialEq)]
pub struct Schema {
    columns: Vec<(String, ColumnRole)>,
}

impl Schema {
    /// Build from `(column, role)` pairs.
    pub fn new(columns: Vec<(String, ColumnRole)>) -> Result<Self> {
        let s = Schema { columns };
        for role in [ColumnRole::Date, ColumnRole::Group, ColumnRole::Target] {
            let n = s.columns.iter().filter(|(_, r)| *r == role).count();
            if n != 1 {
                return Err(Error::Config(format!(
                    "schema must map exactly one column to '{}', found {n}",
                    role.render()
                )));
            }
        }
        Ok(s)
    }

    /// Parse the key-value schema text.
    pub fn parse(text: &str) -> Result<Self> {
        let table: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| Error::Config(format!("schema: {e}")))?;
        let mut columns = Vec::new();
        for (k, v) in table {
            let role = v
                .as_str()
                .ok_or_else(|| Error::Config(format!("schema: role of '{k}' must be a string")))?;
            columns.push((k, ColumnRole::parse(role)?));
        }
        Schema::new(columns)
    }

    /// Read a schema file.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Schema::parse(&text).map_err(|e| Error::load(path, e.to_string()))
    }

    /// Render the key-value text form.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (k, r) in &self.columns {
            out.push_str(&format!("{} = \"{}\"\n", toml_key(k), r.render()));
        }
        out
    }

    /// Write the schema file.
    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    /// Columns and roles.
    pub fn columns(&self) -> &[(String, ColumnRole)] {
        &self.columns
    }

    fn column_for(&self, role: ColumnRole) -> &str {
        &self.columns.iter().find(|(_, r)| *r == role).expect("validated").0
    }
}

fn toml_key(k: &str) -> String {
    if !k.is_empty() && k.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-') {
        k.to_string()
    } else {
        format!("\"{}\"", k.replace('\\', "\\\\").replace('"', "\\\""))
    }
}

struct RawGroup {
    rows: Vec<(NaiveDate, Vec<f64>)>,
}

/// Load a panel from a CSV with a header row, one row per (group, date).
///
/// Missing calendar days inside a group are recorded as exclusion gaps.
pub fn load_panel_csv(path: &Path, schema: &Schema) -> Result<PanelDataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::load(path, e.to_string()))?;
    let header = rdr.headers().map_err(|e| Error::load(path, e.to_string()))?.clone();
    let col_index = |name: &str| -> Result<usize> {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::load(path, format!("missing column '{name}'")))
    };
    let date_col = col_index(schema.column_for(ColumnRole::Date))?;
    let group_col = col_index(schema.column_for(ColumnRole::Group))?;
    let target_col = col_index(schema.column_for(ColumnRole::Target))?;
    // value columns: target first, then covariates in schema order
    let mut value_cols = vec![target_col];
    let mut covs: Vec<(&str, CovariateClass, Option<usize>)> = Vec::new();
    for (name, role) in schema.columns() {
        if let ColumnRole::Covariate { class, categories } = role {
            value_cols.push(col_index(name)?);
            covs.push((name, *class, *categories));
        }
    }

    let mut order: Vec<String> = Vec::new();
    let mut groups: BTreeMap<String, RawGroup> = BTreeMap::new();
    for (i, rec) in rdr.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| Error::load(path, e.to_string()))?;
        let field = |c: usize| rec.get(c).unwrap_or("");
        let date = NaiveDate::parse_from_str(field(date_col), "%Y-%m-%d").map_err(|e| {
            Error::load(path, format!("line {line}: unparseable date '{}': {e}", field(date_col)))
        })?;
        let gid = field(group_col).to_string();
        let mut vals = Vec::with_capacity(value_cols.len());
        for &c in &value_cols {
            let v: f64 = field(c).parse().map_err(|_| {
                Error::load(
                    path,
                    format!("line {line}: column '{}' has unparseable value '{}'", &header[c], field(c)),
                )
            })?;
            vals.push(v);
        }
        if !(vals[0] >= 0.0) {
            return Err(Error::load(path, format!("line {line}: negative target {}", vals[0])));
        }
        if !groups.contains_key(&gid) {
            order.push(gid.clone());
        }
        groups.entry(gid).or_insert(RawGroup { rows: Vec::new() }).rows.push((date, vals));
    }

    let mut out = Vec::with_capacity(order.len());
    let mut gaps: BTreeSet<DateRange> = BTreeSet::new();
    for gid in order {
        let mut raw = groups.remove(&gid).expect("group present");
        raw.rows.sort_by_key(|(d, _)| *d);
        for w in raw.rows.windows(2) {
            if w[0].0 == w[1].0 {
                return Err(Error::load(path, format!("duplicate (group, date) pair ({gid}, {})", w[0].0)));
            }
            if w[1].0 - w[0].0 > chrono::TimeDelta::days(1) {
                gaps.insert(DateRange {
                    start: w[0].0 + Days::new(1),
                    end: w[1].0 - Days::new(1),
                });
            }
        }
        let dates: Vec<NaiveDate> = raw.rows.iter().map(|(d, _)| *d).collect();
        let column = |j: usize| raw.rows.iter().map(|(_, v)| v[j]).collect::<Vec<f64>>();
        let mut g = GroupSeries {
            group_id: gid.clone(),
            dates,
            target: column(0),
            past: Vec::new(),
            future: Vec::new(),
            statics: Vec::new(),
        };
        for (j, (name, class, categories)) in covs.iter().enumerate() {
            let values = column(j + 1);
            match class {
                CovariateClass::Static => {
                    let v = values.first().copied().unwrap_or(f64::NAN);
                    if values.iter().any(|x| *x != v) {
                        return Err(Error::load(
                            path,
                            format!("static column '{name}' varies within group '{gid}'"),
                        ));
                    }
                    g.statics.push(StaticCovariate {
                        name: name.to_string(),
                        categories: *categories,
                        value: v,
                    });
                }
                CovariateClass::Past | CovariateClass::Future => {
                    let c = Covariate {
                        name: name.to_string(),
                        categories: *categories,
                        values,
                    };
                    if *class == CovariateClass::Past {
                        g.past.push(c);
                    } else {
                        g.future.push(c);
                    }
                }
            }
        }
        out.push(g);
    }
    infer_cardinalities(&mut out);
    PanelDataset::new(out, gaps.into_iter().collect()).map_err(|e| Error::load(path, e.to_string()))
}

// `Some(0)` marks "categorical, infer the cardinality from the data".
fn infer_cardinalities(groups: &mut [GroupSeries]) {
    let Some(first) = groups.first() else { return };
    let n_past = first.past.len();
    let n_future = first.future.len();
    let n_static = first.statics.len();
    for j in 0..n_past {
        if groups[0].past[j].categories == Some(0) {
            let k = groups.iter().flat_map(|g| g.past[j].values.iter()).fold(0.0f64, |a, b| a.max(*b));
            groups.iter_mut().for_each(|g| g.past[j].categories = Some(k as usize + 1));
        }
    }
    for j in 0..n_future {
        if groups[0].future[j].categories == Some(0) {
            let k = groups.iter().flat_map(|g| g.future[j].values.iter()).fold(0.0f64, |a, b| a.max(*b));
            groups.iter_mut().for_each(|g| g.future[j].categories = Some(k as usize + 1));
        }
    }
    for j in 0..n_static {
        if groups[0].statics[j].categories == Some(0) {
            let k = groups.iter().map(|g| g.statics[j].value).fold(0.0f64, f64::max);
            groups.iter_mut().for_each(|g| g.statics[j].categories = Some(k as usize + 1));
        }
    }
}

/// Write a panel as CSV (`date`, `group`, `target`, then covariates) and
/// return the schema that reloads it.
pub fn write_panel_csv(ds: &PanelDataset, path: &Path) -> Result<Schema> {
    let mut columns = vec![
        ("date".to_string(), ColumnRole::Date),
        ("group".to_string(), ColumnRole::Group),
        ("target".to_string(), ColumnRole::Target),
    ];
    if let Some(g) = ds.groups().first() {
        for c in &g.past {
            columns.push((c.name.clone(), ColumnRole::Covariate { class: CovariateClass::Past, categories: c.categories }));
        }
        for c in &g.future {
            columns.push((c.name.clone(), ColumnRole::Covariate { class: CovariateClass::Future, categories: c.categories }));
        }
        for c in &g.statics {
            columns.push((c.name.clone(), ColumnRole::Covariate { class: CovariateClass::Static, categories: c.categories }));
        }
    }
    let schema = Schema::new(columns)?;
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::load(path, e.to_string()))?;
    let header: Vec<&str> = schema.columns().iter().map(|(k, _)| k.as_str()).collect();
    let csv_err = |e: csv::Error| Error::load(path, e.to_string());
    w.write_record(&header).map_err(csv_err)?;
    for g in ds.groups() {
        for i in 0..g.len() {
            let mut rec = vec![g.dates[i].format("%Y-%m-%d").to_string(), g.group_id.clone(), g.target[i].to_string()];
            rec.extend(g.past.iter().map(|c| c.values[i].to_string()));
            rec.extend(g.future.iter().map(|c| c.values[i].to_string()));
            rec.extend(g.statics.iter().map(|c| c.value.to_string()));
            w.write_record(&rec).map_err(csv_err)?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(schema)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn basic_schema() -> Schema {
        Schema::parse("date = \"date\"\ngroup = \"group\"\ntarget = \"target\"\n").unwrap()
    }

    fn write(dir: &tempfile::TempDir, body: &str) -> std::path::PathBuf {
        let p = dir.path().join("panel.csv");
        std::fs::write(&p, body).unwrap();
        p
    }

    #[test]
    fn minimal_two_rows() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "date,group,target\n2022-01-02,north,12\n2022-01-01,north,10\n");
        let ds = load_panel_csv(&p, &basic_schema()).unwrap();
        assert_eq!(ds.groups().len(), 1);
        let g = &ds.groups()[0];
        assert_eq!(g.len(), 2);
        assert_eq!(g.target, vec![10.0, 12.0]);
        assert!(ds.gaps().is_empty());
    }

    #[test]
    fn duplicate_key_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "date,group,target\n2022-01-01,a,1\n2022-01-01,a,2\n");
        let err = load_panel_csv(&p, &basic_schema()).unwrap_err();
        assert!(err.to_string().contains("duplicate"), "{err}");
    }

    #[test]
    fn load_errors_are_descriptive() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "date,region,target\n2022-01-01,a,1\n");
        assert!(load_panel_csv(&p, &basic_schema()).unwrap_err().to_string().contains("missing column 'group'"));
        let p = write(&dir, "date,group,target\n01/02/2022,a,1\n");
        assert!(load_panel_csv(&p, &basic_schema()).unwrap_err().to_string().contains("unparseable date"));
        let p = write(&dir, "date,group,target\n2022-01-01,a,-3\n");
        assert!(load_panel_csv(&p, &basic_schema()).unwrap_err().to_string().contains("negative target"));
    }

    #[test]
    fn missing_days_become_gaps() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "date,group,target\n2022-01-01,a,1\n2022-01-05,a,2\n");
        let ds = load_panel_csv(&p, &basic_schema()).unwrap();
        assert_eq!(ds.gaps().len(), 1);
        assert_eq!(ds.gaps()[0].days(), 3);
    }

    #[test]
    fn schema_roles() {
        let s = Schema::parse(
            "d = \"date\"\nr = \"group\"\ny = \"target\"\nresp = \"past\"\nhol = \"future:categorical:2\"\nlvl = \"static:categorical\"\nx = \"ignore\"\n",
        )
        .unwrap();
        let reparsed = Schema::parse(&s.to_text()).unwrap();
        assert_eq!(s, reparsed);
        assert!(Schema::parse("d = \"date\"\n").is_err());
        assert!(Schema::parse("d = \"date\"\nr = \"group\"\ny = \"target\"\nz = \"weird\"\n").is_err());
    }

    #[test]
    fn covariate_columns_are_classified() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(
            &dir,
            "date,group,target,resp,hol,lvl\n2022-01-01,a,1,0.2,0,3\n2022-01-02,a,2,0.3,1,3\n2022-01-01,b,5,0.1,0,1\n2022-01-02,b,6,0.1,1,1\n",
        );
        let s = Schema::parse(
            "date = \"date\"\ngroup = \"group\"\ntarget = \"target\"\nresp = \"past\"\nhol = \"future:categorical\"\nlvl = \"static\"\n",
        )
        .unwrap();
        let ds = load_panel_csv(&p, &s).unwrap();
        let b = ds.group("b").unwrap();
        assert_eq!(b.past[0].values, vec![0.1, 0.1]);
        assert_eq!(b.future[0].categories, Some(2));
        assert_eq!(b.statics[0].value, 1.0);
    }
}
