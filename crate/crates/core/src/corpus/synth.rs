use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{CorpusError, DepSentence, EventMention, TemporalStatus, Token};

/// Template grammar used by [`generate_synthetic`].
///
/// Every sentence has the shape
///
/// ```text
/// The SUBJ AUX CUE FILLER{L} [a OBJ , VERB] their TARGET on DAY .
/// ```
///
/// `CUE` is the root. `AUX` (`aux` -> CUE) and the inflection of `CUE` carry
/// the label: `will launch` (FU), `had launched` (PA), `is launching` (OG).
/// `TARGET` is either the direct object of `CUE` or, with probability 1/2, the
/// object of an intermediate gerund `VERB` (`xcomp` -> CUE) that follows a
/// sibling object phrase. Fillers are `advmod` dependents of `CUE`, so they
/// sit between the cue and the target on the surface but off the target's
/// dependency chain. The `on DAY .` tail hangs off `CUE` as well.
pub const SYNTH_GRAMMAR: &str = "The SUBJ AUX CUE FILLER{L} [a OBJ , VERB] their TARGET on DAY .";

const SUBJECTS: &[&str] = &[
    "union",
    "coalition",
    "group",
    "movement",
    "alliance",
    "committee",
    "federation",
    "network",
];

// (base, past participle, progressive)
const CUE_VERBS: &[(&str, &str, &str)] = &[
    ("launch", "launched", "launching"),
    ("stage", "staged", "staging"),
    ("hold", "held", "holding"),
    ("organize", "organized", "organizing"),
    ("begin", "begun", "beginning"),
    ("start", "started", "starting"),
    ("lead", "led", "leading"),
];

const FILLERS: &[&str] = &[
    "here",
    "again",
    "downtown",
    "together",
    "peacefully",
    "outside",
    "publicly",
    "jointly",
    "locally",
    "abroad",
    "quietly",
    "loudly",
    "nationwide",
    "openly",
];

const OBJECTS: &[&str] = &["strike", "boycott", "campaign", "blockade", "vigil"];

const LINK_VERBS: &[&str] = &[
    "describing",
    "calling",
    "defending",
    "announcing",
    "explaining",
    "justifying",
];

const TARGETS: &[&str] = &[
    "protest",
    "march",
    "rally",
    "demonstration",
    "walkout",
    "sit-in",
    "picket",
];

const DAYS: &[&str] = &[
    "Monday",
    "Tuesday",
    "Wednesday",
    "Thursday",
    "Friday",
    "Saturday",
    "Sunday",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub n_sentences: usize,
    /// Proportions of PAST, ONGOING, FUTURE.
    pub label_weights: [f64; 3],
    /// Filler tokens between the cue verb and the target.
    pub distractor_len: usize,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_sentences: 1000,
            label_weights: [0.67, 0.21, 0.12],
            distractor_len: 9,
            seed: 7,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<(), CorpusError> {
        if self.n_sentences == 0 {
            return Err(CorpusError::Config("n_sentences must be at least 1".into()));
        }
        if self
            .label_weights
            .iter()
            .any(|w| !w.is_finite() || *w < 0.0)
        {
            return Err(CorpusError::Config(
                "label weights must be finite and nonnegative".into(),
            ));
        }
        let sum: f64 = self.label_weights.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(CorpusError::Config(format!(
                "label weights must sum to 1, got {sum}"
            )));
        }
        Ok(())
    }
}

struct Builder {
    tokens: Vec<Token>,
}

impl Builder {
    fn push(&mut self, form: &str, lemma: &str, upos: &str, deprel: &str) -> usize {
        let id = self.tokens.len() + 1;
        self.tokens.push(Token {
            id,
            form: form.to_string(),
            lemma: Some(lemma.to_string()),
            upos: Some(upos.to_string()),
            head: 0,
            deprel: deprel.to_string(),
        });
        id
    }

    fn attach(&mut self, dependent: usize, head: usize) {
        self.tokens[dependent - 1].head = head;
    }
}

fn sample_label(rng: &mut ChaCha8Rng, weights: &[f64; 3]) -> TemporalStatus {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (i, w) in weights.iter().enumerate() {
        acc += w;
        if u < acc {
            return TemporalStatus::ALL[i];
        }
    }
    // Rounding can leave u above the last cumulative sum; fall back to the last nonzero class.
    let last = weights.iter().rposition(|w| *w > 0.0).unwrap_or(0);
    TemporalStatus::ALL[last]
}

fn pick<'a>(rng: &mut ChaCha8Rng, pool: &[&'a str]) -> &'a str {
    pool.choose(rng).expect("non-empty pool")
}

/// Deterministic templated corpus with one labeled target event per sentence.
pub fn generate_synthetic(
    cfg: &SynthConfig,
) -> Result<(Vec<DepSentence>, Vec<EventMention>), CorpusError> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut sentences = Vec::with_capacity(cfg.n_sentences);
    let mut mentions = Vec::with_capacity(cfg.n_sentences);

    for i in 0..cfg.n_sentences {
        let label = sample_label(&mut rng, &cfg.label_weights);
        let mut b = Builder { tokens: Vec::new() };

        let det = b.push("The", "the", "DET", "det");
        let subj_form = pick(&mut rng, SUBJECTS);
        let subj = b.push(subj_form, subj_form, "NOUN", "nsubj");
        let (aux_form, aux_lemma) = match label {
            TemporalStatus::Future => ("will", "will"),
            TemporalStatus::Past => ("had", "have"),
            TemporalStatus::Ongoing => ("is", "be"),
        };
        let aux = b.push(aux_form, aux_lemma, "AUX", "aux");
        let &(base, participle, progressive) = CUE_VERBS.choose(&mut rng).expect("cue verbs");
        let cue_form = match label {
            TemporalStatus::Future => base,
            TemporalStatus::Past => participle,
            TemporalStatus::Ongoing => progressive,
        };
        let cue = b.push(cue_form, base, "VERB", "root");
        b.attach(det, subj);
        b.attach(subj, cue);
        b.attach(aux, cue);

        for _ in 0..cfg.distractor_len {
            let f = pick(&mut rng, FILLERS);
            let id = b.push(f, f, "ADV", "advmod");
            b.attach(id, cue);
        }

        let governor = if rng.gen_bool(0.5) {
            let a = b.push("a", "a", "DET", "det");
            let obj_form = pick(&mut rng, OBJECTS);
            let obj = b.push(obj_form, obj_form, "NOUN", "obj");
            let comma = b.push(",", ",", "PUNCT", "punct");
            let verb_form = pick(&mut rng, LINK_VERBS);
            let verb = b.push(verb_form, verb_form, "VERB", "xcomp");
            b.attach(a, obj);
            b.attach(obj, cue);
            b.attach(comma, cue);
            b.attach(verb, cue);
            verb
        } else {
            cue
        };

        let poss = b.push("their", "they", "PRON", "nmod:poss");
        let target_form = pick(&mut rng, TARGETS);
        let target = b.push(target_form, target_form, "NOUN", "obj");
        b.attach(poss, target);
        b.attach(target, governor);

        let on = b.push("on", "on", "ADP", "case");
        let day_form = pick(&mut rng, DAYS);
        let day = b.push(day_form, day_form, "PROPN", "obl");
        let stop = b.push(".", ".", "PUNCT", "punct");
        b.attach(on, day);
        b.attach(day, cue);
        b.attach(stop, cue);

        let doc_id = format!("synth{:04}", i / 10);
        let sent_id = format!("s{i:05}");
        sentences.push(DepSentence::new(&doc_id, &sent_id, b.tokens)?);
        mentions.push(EventMention {
            doc_id,
            sent_id,
            token_id: target,
            label: Some(label),
        });
    }
    Ok((sentences, mentions))
}
