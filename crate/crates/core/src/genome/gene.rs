//! Gene trees: the genotype of a single request input.

use rand::Rng;
use serde_json::{Map, Number, Value};

use crate::schema::{ParamKind, ParamSpec, MAX_SCHEMA_DEPTH};

use super::GenomeError;

pub const DEFAULT_STRING_MAX_LEN: usize = 32;
pub const DEFAULT_ARRAY_MAX_SIZE: usize = 4;
/// Largest exponent used by the integer delta mutation (`±2^k`).
pub const MAX_DELTA_EXPONENT: u32 = 10;

const YEAR_RANGE: (i32, i32) = (1900, 2100);
const DOUBLE_SAMPLE_RANGE: f64 = 1000.0;
/// Success probability of the geometric string-length draw (mean length 5).
const STRING_LENGTH_P: f64 = 1.0 / 6.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DateTimeValue {
    pub year: i32,
    pub month: u8,
    pub day: u8,
    pub hour: u8,
    pub minute: u8,
    pub second: u8,
}

impl DateTimeValue {
    /// Month and day are not zero-padded; the fraction is always `.000Z`.
    pub fn render(&self) -> String {
        format!(
            "{}-{}-{}T{}:{:02}:{:02}.000Z",
            self.year, self.month, self.day, self.hour, self.minute, self.second
        )
    }

    fn field_bounds(field: usize) -> (i32, i32) {
        match field {
            0 => YEAR_RANGE,
            1 => (1, 12),
            2 => (1, 31),
            3 => (0, 23),
            _ => (0, 59),
        }
    }

    fn get(&self, field: usize) -> i32 {
        match field {
            0 => self.year,
            1 => self.month.into(),
            2 => self.day.into(),
            3 => self.hour.into(),
            4 => self.minute.into(),
            _ => self.second.into(),
        }
    }

    fn set(&mut self, field: usize, v: i32) {
        match field {
            0 => self.year = v,
            1 => self.month = v as u8,
            2 => self.day = v as u8,
            3 => self.hour = v as u8,
            4 => self.minute = v as u8,
            _ => self.second = v as u8,
        }
    }

    pub fn is_valid(&self) -> bool {
        (0..6).all(|f| {
            let (lo, hi) = Self::field_bounds(f);
            (lo..=hi).contains(&self.get(f))
        })
    }

    fn sample<R: Rng + ?Sized>(rng: &mut R) -> Self {
        let mut d = DateTimeValue { year: 0, month: 0, day: 0, hour: 0, minute: 0, second: 0 };
        for f in 0..6 {
            let (lo, hi) = Self::field_bounds(f);
            d.set(f, rng.gen_range(lo..=hi));
        }
        d
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Gene {
    Int32 { value: i32, min: i32, max: i32 },
    Int64 { value: i64, min: i64, max: i64 },
    Double { value: f64 },
    Boolean { value: bool },
    Str { value: String, min_len: usize, max_len: usize },
    DateTime(DateTimeValue),
    Enum { values: Vec<String>, index: usize },
    Optional { active: bool, inner: Box<Gene> },
    Object { fields: Vec<(String, Gene)> },
    /// `prototype` fixes the element shape; new elements are fresh samples of it.
    Array { elements: Vec<Gene>, max_size: usize, prototype: Box<Gene> },
}

impl Gene {
    /// Samples a gene for `spec`, wrapping it in an `Optional` when the parameter is not required.
    pub fn sample<R: Rng + ?Sized>(spec: &ParamSpec, rng: &mut R) -> Result<Gene, GenomeError> {
        Self::sample_at(spec, 0, rng)
    }

    fn sample_at<R: Rng + ?Sized>(spec: &ParamSpec, depth: usize, rng: &mut R) -> Result<Gene, GenomeError> {
        let gene = Self::sample_required(spec, depth, rng)?;
        Ok(if spec.required {
            gene
        } else {
            Gene::Optional { active: rng.gen_bool(0.5), inner: Box::new(gene) }
        })
    }

    fn sample_required<R: Rng + ?Sized>(
        spec: &ParamSpec,
        depth: usize,
        rng: &mut R,
    ) -> Result<Gene, GenomeError> {
        let c = &spec.constraints;
        let bad = |why: &str| GenomeError::Unsupported { param: spec.name.clone(), reason: why.into() };
        let gene = match &spec.kind {
            ParamKind::Int32 => {
                let min = c.minimum.map_or(i32::MIN, |m| m.ceil().clamp(i32::MIN as f64, i32::MAX as f64) as i32);
                let max = c.maximum.map_or(i32::MAX, |m| m.floor().clamp(i32::MIN as f64, i32::MAX as f64) as i32);
                if min > max {
                    return Err(bad("minimum exceeds maximum"));
                }
                Gene::Int32 { value: rng.gen_range(min..=max), min, max }
            }
            ParamKind::Int64 => {
                let min = c.minimum.map_or(i64::MIN, |m| m.ceil() as i64);
                let max = c.maximum.map_or(i64::MAX, |m| m.floor() as i64);
                if min > max {
                    return Err(bad("minimum exceeds maximum"));
                }
                Gene::Int64 { value: rng.gen_range(min..=max), min, max }
            }
            ParamKind::Double => {
                let lo = c.minimum.unwrap_or(-DOUBLE_SAMPLE_RANGE);
                let hi = c.maximum.unwrap_or(DOUBLE_SAMPLE_RANGE);
                if lo.partial_cmp(&hi).is_none_or(|o| o.is_gt()) {
                    return Err(bad("minimum exceeds maximum"));
                }
                Gene::Double { value: if lo == hi { lo } else { rng.gen_range(lo..hi) } }
            }
            ParamKind::Boolean => Gene::Boolean { value: rng.gen() },
            ParamKind::String => {
                let min_len = c.min_length.unwrap_or(0);
                let max_len = c.max_length.unwrap_or(DEFAULT_STRING_MAX_LEN.max(min_len));
                if min_len > max_len {
                    return Err(bad("minLength exceeds maxLength"));
                }
                let len = geometric_len(rng).clamp(min_len, max_len);
                Gene::Str { value: random_string(len, rng), min_len, max_len }
            }
            ParamKind::DateTime => Gene::DateTime(DateTimeValue::sample(rng)),
            ParamKind::Enum { values } => {
                if values.is_empty() {
                    return Err(bad("enum without values"));
                }
                Gene::Enum { values: values.clone(), index: rng.gen_range(0..values.len()) }
            }
            ParamKind::Object { fields } => {
                if depth >= MAX_SCHEMA_DEPTH {
                    return Ok(Gene::Object { fields: Vec::new() });
                }
                for (i, f) in fields.iter().enumerate() {
                    if fields[..i].iter().any(|g| g.name == f.name) {
                        return Err(bad("duplicate object field"));
                    }
                }
                let fields = fields
                    .iter()
                    .map(|f| Ok((f.name.clone(), Self::sample_at(f, depth + 1, rng)?)))
                    .collect::<Result<_, GenomeError>>()?;
                Gene::Object { fields }
            }
            ParamKind::Array { element } => {
                let max_size = if depth >= MAX_SCHEMA_DEPTH {
                    0
                } else {
                    c.max_items.unwrap_or(DEFAULT_ARRAY_MAX_SIZE)
                };
                let prototype = Self::sample_at(element, depth + 1, rng)?;
                let n = rng.gen_range(0..=max_size);
                let elements = (0..n).map(|_| prototype.resampled(rng)).collect();
                Gene::Array { elements, max_size, prototype: Box::new(prototype) }
            }
        };
        Ok(gene)
    }

    /// Same shape, fresh random values.
    pub fn resampled<R: Rng + ?Sized>(&self, rng: &mut R) -> Gene {
        let mut g = self.clone();
        g.randomize(rng);
        g
    }

    pub fn randomize<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        match self {
            Gene::Int32 { value, min, max } => *value = rng.gen_range(*min..=*max),
            Gene::Int64 { value, min, max } => *value = rng.gen_range(*min..=*max),
            Gene::Double { value } => *value = rng.gen_range(-DOUBLE_SAMPLE_RANGE..DOUBLE_SAMPLE_RANGE),
            Gene::Boolean { value } => *value = rng.gen(),
            Gene::Str { value, min_len, max_len } => {
                *value = random_string(geometric_len(rng).clamp(*min_len, *max_len), rng)
            }
            Gene::DateTime(d) => *d = DateTimeValue::sample(rng),
            Gene::Enum { values, index } => *index = rng.gen_range(0..values.len()),
            Gene::Optional { active, inner } => {
                *active = rng.gen_bool(0.5);
                inner.randomize(rng);
            }
            Gene::Object { fields } => fields.iter_mut().for_each(|(_, g)| g.randomize(rng)),
            Gene::Array { elements, max_size, prototype } => {
                let n = rng.gen_range(0..=*max_size);
                *elements = (0..n).map(|_| prototype.resampled(rng)).collect();
            }
        }
    }

    pub fn is_leaf(&self) -> bool {
        !matches!(self, Gene::Optional { .. } | Gene::Object { .. } | Gene::Array { .. })
    }

    /// Checks value-level invariants over the whole tree.
    pub fn is_valid(&self) -> bool {
        match self {
            Gene::Int32 { value, min, max } => min <= value && value <= max,
            Gene::Int64 { value, min, max } => min <= value && value <= max,
            Gene::Double { value } => value.is_finite(),
            Gene::Boolean { .. } => true,
            Gene::Str { value, min_len, max_len } => {
                let n = value.chars().count();
                *min_len <= n && n <= *max_len && value.chars().all(is_printable)
            }
            Gene::DateTime(d) => d.is_valid(),
            Gene::Enum { values, index } => *index < values.len(),
            Gene::Optional { inner, .. } => inner.is_valid(),
            Gene::Object { fields } => fields.iter().all(|(_, g)| g.is_valid()),
            Gene::Array { elements, max_size, prototype } => {
                elements.len() <= *max_size && prototype.is_valid() && elements.iter().all(Gene::is_valid)
            }
        }
    }

    /// Number of nodes reachable through active structure that satisfy `pred`.
    pub(crate) fn count(&self, pred: fn(&Gene) -> bool) -> usize {
        let own = usize::from(pred(self));
        own + match self {
            Gene::Optional { active: true, inner } => inner.count(pred),
            Gene::Object { fields } => fields.iter().map(|(_, g)| g.count(pred)).sum(),
            Gene::Array { elements, .. } => elements.iter().map(|g| g.count(pred)).sum(),
            _ => 0,
        }
    }

    /// The `n`-th node (pre-order) satisfying `pred`; `n` is decremented while walking.
    pub(crate) fn nth_mut(&mut self, n: &mut usize, pred: fn(&Gene) -> bool) -> Option<&mut Gene> {
        if pred(self) {
            if *n == 0 {
                return Some(self);
            }
            *n -= 1;
        }
        match self {
            Gene::Optional { active: true, inner } => inner.nth_mut(n, pred),
            Gene::Object { fields } => fields.iter_mut().find_map(|(_, g)| g.nth_mut(n, pred)),
            Gene::Array { elements, .. } => elements.iter_mut().find_map(|g| g.nth_mut(n, pred)),
            _ => None,
        }
    }

    /// JSON form; `None` for an inactive optional.
    pub fn to_json(&self) -> Option<Value> {
        Some(match self {
            Gene::Int32 { value, .. } => Value::from(*value),
            Gene::Int64 { value, .. } => Value::from(*value),
            Gene::Double { value } => Number::from_f64(*value).map_or(Value::Null, Value::Number),
            Gene::Boolean { value } => Value::Bool(*value),
            Gene::Str { value, .. } => Value::String(value.clone()),
            Gene::DateTime(d) => Value::String(d.render()),
            Gene::Enum { values, index } => Value::String(values[*index].clone()),
            Gene::Optional { active, inner } => return if *active { inner.to_json() } else { None },
            Gene::Object { fields } => {
                let map: Map<String, Value> = fields
                    .iter()
                    .filter_map(|(k, g)| g.to_json().map(|v| (k.clone(), v)))
                    .collect();
                Value::Object(map)
            }
            Gene::Array { elements, .. } => Value::Array(elements.iter().filter_map(Gene::to_json).collect()),
        })
    }

    /// Text form for path, query and header positions.
    pub fn to_param_string(&self) -> Option<String> {
        match self.to_json()? {
            Value::String(s) => Some(s),
            other => Some(other.to_string()),
        }
    }
}

fn is_printable(c: char) -> bool {
    (' '..='~').contains(&c)
}

fn geometric_len<R: Rng + ?Sized>(rng: &mut R) -> usize {
    let mut n = 0;
    while !rng.gen_bool(STRING_LENGTH_P) {
        n += 1;
    }
    n
}

fn random_char<R: Rng + ?Sized>(rng: &mut R) -> char {
    rng.gen_range(' '..='~')
}

fn random_string<R: Rng + ?Sized>(len: usize, rng: &mut R) -> String {
    (0..len).map(|_| random_char(rng)).collect()
}

/// `value ± 2^k`, clamped to `[min, max]`. The opposite sign is used when the
/// clamped result would equal the old value.
pub fn shift_integer(value: i64, min: i64, max: i64, k: u32, positive: bool) -> i64 {
    let step = 1i128 << k;
    let apply = |up: bool| {
        let v = if up { value as i128 + step } else { value as i128 - step };
        v.clamp(min as i128, max as i128) as i64
    };
    let first = apply(positive);
    if first != value {
        first
    } else {
        apply(!positive)
    }
}

/// Applies one mutation to `gene` in place.
pub fn mutate_in_place<R: Rng + ?Sized>(gene: &mut Gene, rng: &mut R) {
    match gene {
        Gene::Int32 { value, min, max } => {
            let k = rng.gen_range(0..=MAX_DELTA_EXPONENT);
            let up = rng.gen_bool(0.5);
            *value = shift_integer((*value).into(), (*min).into(), (*max).into(), k, up) as i32;
        }
        Gene::Int64 { value, min, max } => {
            let k = rng.gen_range(0..=MAX_DELTA_EXPONENT);
            let up = rng.gen_bool(0.5);
            *value = shift_integer(*value, *min, *max, k, up);
        }
        Gene::Double { value } => {
            let next = if rng.gen_bool(0.5) {
                *value * rng.gen_range(0.5..=2.0)
            } else if rng.gen_bool(0.5) {
                *value + 1.0
            } else {
                *value - 1.0
            };
            *value = if next.is_finite() { next } else { 0.0 };
        }
        Gene::Boolean { value } => *value = !*value,
        Gene::Str { value, min_len, max_len } => mutate_string(value, *min_len, *max_len, rng),
        Gene::DateTime(d) => {
            let field = rng.gen_range(0..6);
            let (lo, hi) = DateTimeValue::field_bounds(field);
            let old = d.get(field);
            // Uniform over the other values in range.
            let mut v = rng.gen_range(lo..hi);
            if v >= old {
                v += 1;
            }
            d.set(field, v);
        }
        Gene::Enum { values, index } => {
            if values.len() >= 2 {
                let mut i = rng.gen_range(0..values.len() - 1);
                if i >= *index {
                    i += 1;
                }
                *index = i;
            }
        }
        Gene::Optional { active, .. } => *active = !*active,
        Gene::Object { fields } => {
            if !fields.is_empty() {
                let i = rng.gen_range(0..fields.len());
                mutate_in_place(&mut fields[i].1, rng);
            }
        }
        Gene::Array { elements, max_size, prototype } => {
            if *max_size == 0 {
                return;
            }
            if elements.is_empty() || rng.gen_bool(1.0 / 3.0) {
                let can_grow = elements.len() < *max_size;
                let can_shrink = !elements.is_empty();
                let grow = match (can_grow, can_shrink) {
                    (true, true) => rng.gen_bool(0.5),
                    (grow, _) => grow,
                };
                if grow {
                    let at = rng.gen_range(0..=elements.len());
                    elements.insert(at, prototype.resampled(rng));
                } else {
                    let at = rng.gen_range(0..elements.len());
                    elements.remove(at);
                }
            } else {
                let i = rng.gen_range(0..elements.len());
                mutate_in_place(&mut elements[i], rng);
            }
        }
    }
}

/// Returns a mutated copy of `gene`.
pub fn mutate_gene<R: Rng + ?Sized>(gene: &Gene, rng: &mut R) -> Gene {
    let mut g = gene.clone();
    mutate_in_place(&mut g, rng);
    g
}

fn mutate_string<R: Rng + ?Sized>(value: &mut String, min_len: usize, max_len: usize, rng: &mut R) {
    let mut chars: Vec<char> = value.chars().collect();
    let len = chars.len();
    let mut ops = Vec::with_capacity(3);
    if len < max_len {
        ops.push(0);
    }
    if len > min_len {
        ops.push(1);
    }
    if len > 0 {
        ops.push(2);
    }
    let Some(&op) = ops.get(rng.gen_range(0..ops.len().max(1))) else { return };
    match op {
        0 => chars.insert(rng.gen_range(0..=len), random_char(rng)),
        1 => {
            chars.remove(rng.gen_range(0..len));
        }
        _ => {
            let i = rng.gen_range(0..len);
            let old = chars[i];
            let mut c = random_char(rng);
            while c == old {
                c = random_char(rng);
            }
            chars[i] = c;
        }
    }
    *value = chars.into_iter().collect();
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng() -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(7)
    }

    #[test]
    fn boolean_flips() {
        let g = Gene::Boolean { value: true };
        assert_eq!(mutate_gene(&g, &mut rng()), Gene::Boolean { value: false });
    }

    #[test]
    fn single_value_enum_is_unchanged() {
        let g = Gene::Enum { values: vec!["A".into()], index: 0 };
        assert_eq!(mutate_gene(&g, &mut rng()), g);
    }

    #[test]
    fn two_value_enum_always_changes() {
        let mut r = rng();
        let g = Gene::Enum { values: vec!["A".into(), "B".into()], index: 1 };
        for _ in 0..50 {
            assert_eq!(mutate_gene(&g, &mut r), Gene::Enum { values: vec!["A".into(), "B".into()], index: 0 });
        }
    }

    #[test]
    fn integer_delta_formula() {
        // 0 + 2^3
        assert_eq!(shift_integer(0, i32::MIN.into(), i32::MAX.into(), 3, true), 8);
        assert_eq!(shift_integer(0, i32::MIN.into(), i32::MAX.into(), 3, false), -8);
        // clamps, and flips sign when clamping would be a no-op
        assert_eq!(shift_integer(5, 0, 10, 10, true), 10);
        assert_eq!(shift_integer(10, 0, 10, 2, true), 6);
        assert_eq!(shift_integer(3, 3, 3, 0, true), 3);
        assert_eq!(shift_integer(i64::MAX, i64::MIN, i64::MAX, 0, true), i64::MAX - 1);
    }

    #[test]
    fn int_leaf_mutation_changes_value() {
        let mut r = rng();
        let mut g = Gene::Int32 { value: 0, min: i32::MIN, max: i32::MAX };
        for _ in 0..1000 {
            let next = mutate_gene(&g, &mut r);
            assert_ne!(next, g);
            assert!(next.is_valid());
            g = next;
        }
    }

    #[test]
    fn date_rendering_is_unpadded() {
        let d = DateTimeValue { year: 1968, month: 7, day: 28, hour: 10, minute: 40, second: 58 };
        assert_eq!(d.render(), "1968-7-28T10:40:58.000Z");
        let early = DateTimeValue { year: 2001, month: 1, day: 2, hour: 3, minute: 4, second: 5 };
        assert_eq!(early.render(), "2001-1-2T3:04:05.000Z");
    }

    #[test]
    fn mutations_keep_shapes_valid() {
        let mut r = rng();
        let genes = vec![
            Gene::Str { value: String::new(), min_len: 0, max_len: 3 },
            Gene::DateTime(DateTimeValue { year: 1900, month: 12, day: 31, hour: 0, minute: 59, second: 0 }),
            Gene::Double { value: 1e300 },
            Gene::Array {
                elements: vec![],
                max_size: 2,
                prototype: Box::new(Gene::Int64 { value: 0, min: -3, max: 3 }),
            },
        ];
        for g in genes {
            let mut cur = g;
            for _ in 0..2000 {
                cur = mutate_gene(&cur, &mut r);
                assert!(cur.is_valid(), "{cur:?}");
            }
        }
    }

    #[test]
    fn bounded_int_reaches_every_value() {
        // Every value of a small bounded gene is reachable by mutation alone.
        let mut r = rng();
        let mut seen = std::collections::BTreeSet::new();
        let mut g = Gene::Int32 { value: 0, min: -20, max: 20 };
        for _ in 0..20_000 {
            g = mutate_gene(&g, &mut r);
            if let Gene::Int32 { value, .. } = g {
                seen.insert(value);
            }
        }
        assert_eq!(seen.len(), 41);
    }

    #[test]
    fn sampled_strings_are_short_and_printable() {
        let mut r = rng();
        let spec = ParamSpec::new("s", ParamKind::String);
        let n = 20_000;
        let mut total = 0usize;
        for _ in 0..n {
            let g = Gene::sample(&spec, &mut r).unwrap();
            assert!(g.is_valid());
            if let Gene::Str { value, .. } = g {
                total += value.len();
            }
        }
        let mean = total as f64 / n as f64;
        // geometric with mean 5, truncated at 32
        assert!((mean - 5.0).abs() < 0.2, "mean {mean}");
    }

    #[test]
    fn object_json_skips_inactive_optionals() {
        let g = Gene::Object {
            fields: vec![
                ("rating".into(), Gene::Int32 { value: 7126434, min: i32::MIN, max: i32::MAX }),
                ("favourite".into(), Gene::Boolean { value: false }),
                (
                    "note".into(),
                    Gene::Optional {
                        active: false,
                        inner: Box::new(Gene::Str { value: "x".into(), min_len: 0, max_len: 4 }),
                    },
                ),
            ],
        };
        assert_eq!(g.to_json().unwrap().to_string(), r#"{"rating":7126434,"favourite":false}"#);
    }
}
