//! Run configuration: a `key = value` file, `--set` overrides and the
//! common flags, resolved lazily as each command asks for values.

use std::cell::RefCell;
use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use deterrence::gam::GamSpec;
use deterrence::geogrid::io::parse_timestamp;
use deterrence::geogrid::{BinLength, GapRules, GridSpec, TimeBinning};
use deterrence::kv::KeyValues;
use deterrence::model::{FitConfig, ModelVariant};
use deterrence::optimizer::AdamConfig;
use deterrence::panel::{LagSpec, NeighborSource, NeighborSpec};

use crate::failure::{CmdResult, Failure};

const KNOWN_KEYS: &[&str] = &[
    "waypoints",
    "observations",
    "features",
    "effort_raster",
    "observation_raster",
    "fit_json",
    "origin_x",
    "origin_y",
    "cell_size",
    "n_cols",
    "n_rows",
    "epoch",
    "n_bins",
    "bin_length",
    "pairing",
    "variant",
    "neighbor_window",
    "neighbor_source",
    "max_time_gap_minutes",
    "max_dist_gap_m",
    "l2_attractiveness",
    "learning_rate",
    "beta1",
    "beta2",
    "epsilon",
    "max_iterations",
    "tolerance",
    "window",
    "seed",
    "mean_a",
    "std_a",
    "beta",
    "gamma",
    "rho",
    "eta",
    "policy",
    "effort_scale",
    "seeds",
    "recover_tolerance",
    "lambda",
    "n_knots",
    "gam_with_effort",
    "gam_significance",
    "curve_points",
];

pub const DEFAULT_EPOCH: &str = "2010-01-01T00:00:00Z";

pub struct RunConfig {
    command: &'static str,
    kv: KeyValues,
    pub out_dir: PathBuf,
    resolved: RefCell<KeyValues>,
}

impl RunConfig {
    pub fn load(
        command: &'static str,
        config: Option<&Path>,
        overrides: &[String],
        seed: Option<u64>,
        out_dir: PathBuf,
    ) -> CmdResult<Self> {
        let mut kv = match config {
            Some(path) if !path.exists() => {
                return Err(Failure::Usage(format!("config file {} does not exist", path.display())))
            }
            Some(path) => KeyValues::read(path).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?,
            None => KeyValues::new(),
        };
        for spec in overrides {
            kv.apply_override(spec).map_err(|e| Failure::Usage(e.to_string()))?;
        }
        if let Some(seed) = seed {
            kv.set("seed", seed);
        }
        for key in kv.keys() {
            let known = KNOWN_KEYS.contains(&key) || key.starts_with("lambda.") || key.starts_with("declared_");
            if !known {
                log::warn!("ignoring unknown config key `{key}`");
            }
        }
        Ok(Self {
            command,
            kv,
            out_dir,
            resolved: RefCell::new(KeyValues::new()),
        })
    }

    pub fn kv(&self) -> &KeyValues {
        &self.kv
    }

    /// Records a value in the resolved-config echo.
    pub fn note(&self, key: &str, value: impl Display) {
        self.resolved.borrow_mut().set(key, value);
    }

    pub fn note_all(&self, kv: &KeyValues) {
        self.resolved.borrow_mut().merge(kv);
    }

    pub fn resolved(&self) -> String {
        self.resolved.borrow().to_string()
    }

    pub fn get_or<T>(&self, key: &str, default: T) -> CmdResult<T>
    where
        T: FromStr + Display,
        T::Err: Display,
    {
        let v = self.kv.get_or(key, default)?;
        self.note(key, &v);
        Ok(v)
    }

    pub fn get<T>(&self, key: &str) -> CmdResult<Option<T>>
    where
        T: FromStr + Display,
        T::Err: Display,
    {
        let v = self.kv.get::<T>(key)?;
        if let Some(v) = &v {
            self.note(key, v);
        }
        Ok(v)
    }

    /// Comma-separated list; `default` when the key is absent.
    pub fn list<T>(&self, key: &str, default: &str) -> CmdResult<Vec<T>>
    where
        T: FromStr,
        T::Err: Display,
    {
        let raw = self.kv.raw(key).unwrap_or(default);
        self.note(key, raw);
        raw.split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|s| {
                s.parse::<T>()
                    .map_err(|e| Failure::Usage(format!("`{key} = {raw}`: {e}")))
            })
            .collect()
    }

    /// An input file: the configured path, or `default_name` in the output
    /// directory. Must exist.
    pub fn input(&self, key: &str, default_name: &str) -> CmdResult<PathBuf> {
        let path = self
            .kv
            .raw(key)
            .map(PathBuf::from)
            .unwrap_or_else(|| self.out_dir.join(default_name));
        self.note(key, path.display());
        if !path.is_file() {
            return Err(Failure::Usage(format!("{key} file {} does not exist", path.display())));
        }
        Ok(path)
    }

    /// Like [`RunConfig::input`] but with no default; `None` when unset.
    pub fn optional_input(&self, key: &str) -> CmdResult<Option<PathBuf>> {
        match self.kv.raw(key) {
            None => Ok(None),
            Some(_) => self.input(key, "").map(Some),
        }
    }

    pub fn required_input(&self, key: &str) -> CmdResult<PathBuf> {
        if !self.kv.contains(key) {
            return Err(Failure::Usage(format!(
                "`{key}` must be set (config file or --set {key}=PATH)"
            )));
        }
        self.input(key, "")
    }

    pub fn seed(&self) -> CmdResult<u64> {
        self.get_or("seed", 0)
    }

    pub fn grid(&self) -> CmdResult<GridSpec> {
        Ok(GridSpec::new(
            self.get_or("origin_x", 0.0)?,
            self.get_or("origin_y", 0.0)?,
            self.get_or("cell_size", GridSpec::DEFAULT_CELL_SIZE)?,
            self.get_or("n_cols", 20)?,
            self.get_or("n_rows", 20)?,
        )?)
    }

    pub fn binning(&self, bin_length: BinLength) -> CmdResult<TimeBinning> {
        let raw = self.kv.raw("epoch").unwrap_or(DEFAULT_EPOCH);
        let epoch = parse_timestamp(raw).ok_or_else(|| Failure::Usage(format!("bad epoch `{raw}`")))?;
        self.note("epoch", epoch.to_rfc3339());
        Ok(TimeBinning::new(epoch, bin_length, self.get_or("n_bins", 48)?)?)
    }

    pub fn pairings(&self) -> CmdResult<Vec<LagSpec>> {
        let pairings: Vec<LagSpec> = self.list("pairing", "1mo/1mo")?;
        if pairings.is_empty() {
            return Err(Failure::Usage("`pairing` is empty".into()));
        }
        Ok(pairings)
    }

    pub fn pairing(&self) -> CmdResult<LagSpec> {
        let pairings = self.pairings()?;
        if pairings.len() > 1 {
            return Err(Failure::Usage("this command takes a single `pairing`".into()));
        }
        Ok(pairings[0])
    }

    /// Bin length shared by every configured pairing.
    pub fn bin_length(&self, pairings: &[LagSpec]) -> CmdResult<BinLength> {
        let current = pairings[0].current;
        if pairings.iter().any(|p| p.current != current) {
            return Err(Failure::Usage(
                "all pairings must share one current bin length (one raster per run)".into(),
            ));
        }
        if let Some(explicit) = self.get::<BinLength>("bin_length")? {
            if explicit != current {
                return Err(Failure::Usage(format!(
                    "bin_length {explicit} disagrees with pairing current length {current}"
                )));
            }
        }
        Ok(current)
    }

    pub fn variant(&self) -> CmdResult<ModelVariant> {
        self.get_or("variant", ModelVariant::PastEffort)
    }

    /// Neighbour windows for `variant`; empty unless the variant uses them.
    pub fn neighbor_specs(&self, variant: ModelVariant) -> CmdResult<Vec<NeighborSpec>> {
        if !variant.needs_neighbors() {
            if self.kv.contains("neighbor_window") {
                log::warn!("neighbor_window is ignored by variant {variant}");
            }
            return Ok(Vec::new());
        }
        let source: NeighborSource = self.kv.get_or("neighbor_source", NeighborSource::IllegalActivity)?;
        self.note("neighbor_source", source.as_str());
        self.list::<usize>("neighbor_window", "3")?
            .into_iter()
            .map(|w| {
                let mut spec = NeighborSpec::new(w)?;
                spec.source = source;
                Ok(spec)
            })
            .collect()
    }

    pub fn gap_rules(&self) -> CmdResult<GapRules> {
        let d = GapRules::default();
        Ok(GapRules::new(
            self.get_or("max_time_gap_minutes", d.max_time_gap.num_minutes())?,
            self.get_or("max_dist_gap_m", d.max_dist_gap)?,
        )?)
    }

    pub fn adam(&self, defaults: AdamConfig) -> CmdResult<AdamConfig> {
        let adam = AdamConfig {
            learning_rate: self.get_or("learning_rate", defaults.learning_rate)?,
            beta1: self.get_or("beta1", defaults.beta1)?,
            beta2: self.get_or("beta2", defaults.beta2)?,
            epsilon: self.get_or("epsilon", defaults.epsilon)?,
            max_iterations: self.get_or("max_iterations", defaults.max_iterations)?,
            tolerance: self.get_or("tolerance", defaults.tolerance)?,
            window: self.get_or("window", defaults.window)?,
        };
        adam.validate()?;
        Ok(adam)
    }

    pub fn fit_config(&self) -> CmdResult<FitConfig> {
        let l2 = self.get::<f64>("l2_attractiveness")?;
        if l2.is_none() {
            self.note("l2_attractiveness", "auto");
        }
        Ok(FitConfig {
            adam: self.adam(AdamConfig::default())?,
            l2_attractiveness: l2,
            seed: self.seed()?,
        })
    }

    pub fn gam_spec(&self) -> CmdResult<GamSpec> {
        let d = GamSpec::default();
        let mut spec = GamSpec {
            default_lambda: self.get_or("lambda", d.default_lambda)?,
            n_knots: self.get_or("n_knots", d.n_knots)?,
            adam: self.adam(d.adam)?,
            ..d
        };
        let per_feature: Vec<String> = self
            .kv
            .keys()
            .filter(|k| k.starts_with("lambda."))
            .map(str::to_string)
            .collect();
        for key in per_feature {
            let value: f64 = self.kv.get_or(&key, spec.default_lambda)?;
            self.note(&key, value);
            spec.lambdas.insert(key["lambda.".len()..].to_string(), value);
        }
        Ok(spec)
    }

    /// Writes the resolved-config echo, `resolved_<command>.txt`.
    pub fn write_resolved(&self) -> CmdResult {
        write_output(
            &self.out_dir.join(format!("resolved_{}.txt", self.command)),
            &self.resolved(),
        )
    }

    pub fn ensure_out_dir(&self) -> CmdResult {
        std::fs::create_dir_all(&self.out_dir)
            .map_err(|e| Failure::Usage(format!("cannot create output dir {}: {e}", self.out_dir.display())))
    }

    pub fn out(&self, name: &str) -> PathBuf {
        self.out_dir.join(name)
    }
}

pub fn write_output(path: &Path, contents: &str) -> CmdResult {
    std::fs::write(path, contents).map_err(|e| Failure::Data(format!("cannot write {}: {e}", path.display())))
}
