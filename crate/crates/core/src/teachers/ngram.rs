use std::collections::{BTreeMap, HashMap};

use super::{predictable_ids, LanguageModel};
use crate::corpus::vocab::{TokenId, BOS, EOS, NUM_RESERVED};
use crate::error::{Error, Result};
use crate::transitions::Direction;

/// `(history, token) -> count`, ordered for stable serialization.
pub(crate) type CountTable = BTreeMap<(Vec<TokenId>, TokenId), u64>;

/// `key=value` pairs from the first line of a count file.
#[derive(Debug, Clone)]
pub(crate) struct TsvHeader(Vec<(String, String)>);

impl TsvHeader {
    pub fn get(&self, key: &str) -> Result<&str> {
        self.0
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
            .ok_or_else(|| Error::data(format!("count file header lacks {key:?}")))
    }

    pub fn parse<T: std::str::FromStr>(&self, key: &str) -> Result<T> {
        let v = self.get(key)?;
        v.parse().map_err(|_| Error::data(format!("malformed header value {key}={v}")))
    }

    pub fn expect(&self, key: &str, value: &str) -> Result<()> {
        let found = self.get(key)?;
        if found != value {
            return Err(Error::data(format!("expected {key}={value}, found {found}")));
        }
        Ok(())
    }
}

pub(crate) fn render_count_tsv(header: &[(&str, String)], table: &CountTable) -> String {
    let fields: Vec<String> = header.iter().map(|(k, v)| format!("{k}={v}")).collect();
    let mut out = format!("# {}\nhistory\ttoken\tcount\n", fields.join(" "));
    for ((hist, w), c) in table {
        let hist: Vec<String> = hist.iter().map(usize::to_string).collect();
        out.push_str(&format!("{}\t{w}\t{c}\n", hist.join(" ")));
    }
    out
}

pub(crate) fn parse_count_tsv(text: &str) -> Result<(TsvHeader, CountTable)> {
    let mut lines = text.lines();
    let first = lines.next().ok_or_else(|| Error::data("empty count file"))?;
    let fields = first.strip_prefix("# ").ok_or_else(|| Error::data("count file lacks a header line"))?;
    let header = fields
        .split_whitespace()
        .map(|f| {
            f.split_once('=')
                .map(|(k, v)| (k.to_string(), v.to_string()))
                .ok_or_else(|| Error::data(format!("malformed header field {f:?}")))
        })
        .collect::<Result<Vec<_>>>()?;
    if lines.next() != Some("history\ttoken\tcount") {
        return Err(Error::data("count file lacks the column header"));
    }
    let bad = |n: usize| Error::data(format!("malformed count line {}", n + 3));
    let mut table = CountTable::new();
    for (n, line) in lines.enumerate() {
        let mut cols = line.split('\t');
        let (Some(h), Some(w), Some(c), None) = (cols.next(), cols.next(), cols.next(), cols.next()) else {
            return Err(bad(n));
        };
        let hist =
            h.split_whitespace().map(|t| t.parse::<TokenId>().map_err(|_| bad(n))).collect::<Result<Vec<_>>>()?;
        let w = w.parse().map_err(|_| bad(n))?;
        let c = c.parse().map_err(|_| bad(n))?;
        table.insert((hist, w), c);
    }
    Ok((TsvHeader(header), table))
}

/// Observed continuations of a history and their total count.
type HistoryCounts = (Vec<(TokenId, u64)>, u64);

/// Interpolated absolute-discounting n-gram model. The lowest order
/// interpolates with a uniform distribution over the predictable tokens.
#[derive(Debug, Clone, PartialEq)]
pub struct NGramModel {
    order: usize,
    discount: f64,
    vocab_size: usize,
    direction: Direction,
    table: CountTable,
    by_history: HashMap<Vec<TokenId>, HistoryCounts>,
    base: Vec<f64>,
}

impl NGramModel {
    pub fn train(
        corpus: &[Vec<TokenId>],
        vocab_size: usize,
        order: usize,
        discount: f64,
        direction: Direction,
    ) -> Result<Self> {
        if order < 1 {
            return Err(Error::invalid("n-gram order must be at least 1"));
        }
        let mut table = CountTable::new();
        for sent in corpus {
            let mut seq = vec![BOS];
            seq.extend(direction.orient(sent));
            seq.push(EOS);
            for &t in &seq[1..seq.len() - 1] {
                if t >= vocab_size || (t < NUM_RESERVED && t != crate::corpus::vocab::UNK) {
                    return Err(Error::data(format!("token id {t} cannot appear in a training sentence")));
                }
            }
            for j in 1..seq.len() {
                for m in 0..order.min(j + 1) {
                    *table.entry((seq[j - m..j].to_vec(), seq[j])).or_insert(0) += 1;
                }
            }
        }
        Self::from_table(table, vocab_size, order, discount, direction)
    }

    fn from_table(
        table: CountTable,
        vocab_size: usize,
        order: usize,
        discount: f64,
        direction: Direction,
    ) -> Result<Self> {
        if !(0.0..=1.0).contains(&discount) {
            return Err(Error::invalid(format!("discount must be in [0, 1], got {discount}")));
        }
        let mut by_history: HashMap<Vec<TokenId>, HistoryCounts> = HashMap::new();
        for ((h, w), &c) in &table {
            let e = by_history.entry(h.clone()).or_default();
            e.0.push((*w, c));
            e.1 += c;
        }
        let Some((uni, total)) = by_history.get(&Vec::new()) else {
            return Err(Error::data("cannot train an n-gram model on an empty corpus"));
        };
        let support = predictable_ids(vocab_size);
        let mut base = vec![0.0; vocab_size];
        let total = *total as f64;
        let spread = discount * uni.len() as f64 / total / support.len() as f64;
        for &w in &support {
            base[w] = spread;
        }
        for &(w, c) in uni {
            base[w] += (c as f64 - discount).max(0.0) / total;
        }
        Ok(NGramModel { order, discount, vocab_size, direction, table, by_history, base })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn discount(&self) -> f64 {
        self.discount
    }

    /// Conditional distribution after a history in reading order, `<s>` included.
    pub fn dist(&self, history: &[TokenId]) -> Vec<f64> {
        let start = history.len().saturating_sub(self.order - 1);
        self.dist_rec(&history[start..])
    }

    fn dist_rec(&self, h: &[TokenId]) -> Vec<f64> {
        if h.is_empty() {
            return self.base.clone();
        }
        let mut p = self.dist_rec(&h[1..]);
        let Some((entries, total)) = self.by_history.get(h) else {
            return p;
        };
        let total = *total as f64;
        let lambda = self.discount * entries.len() as f64 / total;
        p.iter_mut().for_each(|v| *v *= lambda);
        for &(w, c) in entries {
            p[w] += (c as f64 - self.discount).max(0.0) / total;
        }
        p
    }

    pub fn to_tsv(&self, vocab_hash: &str) -> String {
        let header = [
            ("model", "ngram".to_string()),
            ("vocab", vocab_hash.to_string()),
            ("vocab_size", self.vocab_size.to_string()),
            ("order", self.order.to_string()),
            ("discount", self.discount.to_string()),
            ("direction", self.direction.to_string()),
        ];
        render_count_tsv(&header, &self.table)
    }

    pub fn from_tsv(text: &str) -> Result<(Self, String)> {
        let (header, table) = parse_count_tsv(text)?;
        header.expect("model", "ngram")?;
        let vocab_size: usize = header.parse("vocab_size")?;
        let order: usize = header.parse("order")?;
        if table.keys().any(|(h, w)| *w >= vocab_size || h.len() >= order.max(1)) {
            return Err(Error::data("n-gram entry outside the declared vocabulary or order"));
        }
        let model = Self::from_table(table, vocab_size, order, header.parse("discount")?, header.parse("direction")?)?;
        Ok((model, header.get("vocab")?.to_string()))
    }
}

impl LanguageModel for NGramModel {
    type State = Vec<TokenId>;

    fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    fn direction(&self) -> Direction {
        self.direction
    }

    fn initial(&self) -> Result<Vec<TokenId>> {
        Ok(if self.order > 1 { vec![BOS] } else { Vec::new() })
    }

    fn advance(&self, state: &Vec<TokenId>, token: TokenId) -> Result<Vec<TokenId>> {
        if token >= self.vocab_size {
            return Err(Error::data(format!("token id {token} outside vocabulary")));
        }
        let mut h = state.clone();
        h.push(token);
        let keep = self.order - 1;
        if h.len() > keep {
            h.drain(..h.len() - keep);
        }
        Ok(h)
    }

    fn log_dist(&self, state: &Vec<TokenId>) -> Result<Vec<f64>> {
        Ok(self.dist(state).into_iter().map(f64::ln).collect())
    }
}
