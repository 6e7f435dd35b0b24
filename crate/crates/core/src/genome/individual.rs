//! Test cases as sequences of REST actions, with sampling and mutation.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::schema::{ActionTemplate, ApiSchema, CreationLink, ParamSpec};

use super::gene::{mutate_in_place, Gene};
use super::GenomeError;

pub const DEFAULT_MAX_TEST_SIZE: usize = 10;

/// Probability that a sampled dependent action is chained to a fresh creation call.
const CHAIN_PROBABILITY: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ParamLocation {
    Path,
    Query,
    Header,
    Body,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParamGene {
    pub name: String,
    pub location: ParamLocation,
    pub gene: Gene,
}

/// Binds an action's resource id to the location returned by an earlier creation call.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResourceLink {
    /// Index of the creation action in the same individual; always smaller than the
    /// index of the action holding the link.
    pub source_action: usize,
    /// Full path template of the creation endpoint, e.g. `/api/v1/activities`.
    pub creation_path: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RestAction {
    pub template: Arc<ActionTemplate>,
    pub template_index: usize,
    pub genes: Vec<ParamGene>,
    pub path_override: Option<ResourceLink>,
}

impl RestAction {
    pub fn gene(&self, location: ParamLocation, name: &str) -> Option<&Gene> {
        self.genes
            .iter()
            .find(|g| g.location == location && g.name == name)
            .map(|g| &g.gene)
    }

    fn count(&self, pred: fn(&Gene) -> bool) -> usize {
        self.genes.iter().map(|g| g.gene.count(pred)).sum()
    }

    fn nth_mut(&mut self, n: &mut usize, pred: fn(&Gene) -> bool) -> Option<&mut Gene> {
        self.genes.iter_mut().find_map(|g| g.gene.nth_mut(n, pred))
    }
}

/// A test case: calls executed in order, optionally authenticated.
#[derive(Debug, Clone, PartialEq)]
pub struct Individual {
    pub actions: Vec<RestAction>,
    /// Index into the credentials reported by the driver; `None` means anonymous.
    pub auth_index: Option<usize>,
}

impl Individual {
    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    /// Checks the structural invariants of a test case.
    pub fn validate(&self, max_test_size: usize, auth_count: usize) -> Result<(), String> {
        if self.actions.is_empty() || self.actions.len() > max_test_size {
            return Err(format!("length {} outside [1, {max_test_size}]", self.actions.len()));
        }
        if let Some(a) = self.auth_index {
            if a >= auth_count {
                return Err(format!("auth index {a} with {auth_count} credentials"));
            }
        }
        for (i, action) in self.actions.iter().enumerate() {
            if let Some(link) = &action.path_override {
                if link.source_action >= i {
                    return Err(format!("action {i} links forward to {}", link.source_action));
                }
                let source = &self.actions[link.source_action].template;
                if !source.produces_location || source.full_path() != link.creation_path {
                    return Err(format!("action {i} links to a non-creation action"));
                }
            }
            if let Some(g) = action.genes.iter().find(|g| !g.gene.is_valid()) {
                return Err(format!("action {i}: invalid gene {}", g.name));
            }
        }
        Ok(())
    }
}

/// Builds the genotype for one template: one gene per path placeholder, query
/// parameter, header parameter and body.
pub fn genotype_for<R: Rng + ?Sized>(
    template: &ActionTemplate,
    rng: &mut R,
) -> Result<Vec<ParamGene>, GenomeError> {
    let mut genes = Vec::new();
    let groups: [(ParamLocation, &[ParamSpec]); 3] = [
        (ParamLocation::Path, &template.path_params),
        (ParamLocation::Query, &template.query_params),
        (ParamLocation::Header, &template.header_params),
    ];
    for (location, specs) in groups {
        for spec in specs {
            let mut gene = Gene::sample(spec, rng)?;
            if location == ParamLocation::Path {
                // Empty path segments would collapse the URL.
                if let Gene::Str { min_len, max_len, value } = &mut gene {
                    *min_len = (*min_len).max(1);
                    *max_len = (*max_len).max(1);
                    if value.is_empty() {
                        value.push('a');
                    }
                }
            }
            genes.push(ParamGene { name: spec.name.clone(), location, gene });
        }
    }
    if let Some(body) = &template.body_spec {
        let gene = Gene::sample(body, rng)?;
        genes.push(ParamGene { name: body.name.clone(), location: ParamLocation::Body, gene });
    }
    Ok(genes)
}

/// Mutation operators over whole test cases.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MutationArm {
    /// Mutate one leaf (or array) gene.
    Gene,
    ToggleOptional,
    AddAction,
    RemoveAction,
    ChangeAuth,
}

fn is_mutation_point(g: &Gene) -> bool {
    g.is_leaf() || matches!(g, Gene::Array { .. })
}

fn is_optional(g: &Gene) -> bool {
    matches!(g, Gene::Optional { .. })
}

/// Samples and mutates individuals for one schema.
#[derive(Debug, Clone)]
pub struct Sampler {
    schema: Arc<ApiSchema>,
    links: Vec<Option<CreationLink>>,
    auth_count: usize,
    max_test_size: usize,
}

impl Sampler {
    pub fn new(schema: Arc<ApiSchema>, auth_count: usize, max_test_size: usize) -> Result<Self, GenomeError> {
        if schema.templates.is_empty() {
            return Err(GenomeError::EmptySchema);
        }
        if max_test_size == 0 {
            return Err(GenomeError::InvalidSize);
        }
        // Genotype construction only fails on the parameter shape, so one dry run per
        // template validates every later sample.
        let mut probe = ChaCha8Rng::seed_from_u64(0);
        for t in &schema.templates {
            genotype_for(t, &mut probe)?;
        }
        let links = (0..schema.templates.len()).map(|i| schema.creation_link(i)).collect();
        Ok(Self { schema, links, auth_count, max_test_size })
    }

    pub fn schema(&self) -> &ApiSchema {
        &self.schema
    }

    pub fn auth_count(&self) -> usize {
        self.auth_count
    }

    pub fn max_test_size(&self) -> usize {
        self.max_test_size
    }

    pub fn sample_action<R: Rng + ?Sized>(&self, template_index: usize, rng: &mut R) -> RestAction {
        let template = Arc::clone(&self.schema.templates[template_index]);
        let genes = genotype_for(&template, rng).expect("templates validated in Sampler::new");
        RestAction { template, template_index, genes, path_override: None }
    }

    /// Samples the action for `template_index` and, with probability 0.5 when the
    /// template extends a creation endpoint, a creation call before it that it links to.
    /// `offset` is the index the first returned action will occupy.
    pub fn sample_chain<R: Rng + ?Sized>(
        &self,
        template_index: usize,
        offset: usize,
        rng: &mut R,
    ) -> Vec<RestAction> {
        match &self.links[template_index] {
            Some(link) if rng.gen_bool(CHAIN_PROBABILITY) => {
                let creation = self.sample_action(link.creation, rng);
                let mut dependent = self.sample_action(template_index, rng);
                dependent.path_override = Some(ResourceLink {
                    source_action: offset,
                    creation_path: creation.template.full_path(),
                });
                vec![creation, dependent]
            }
            _ => vec![self.sample_action(template_index, rng)],
        }
    }

    pub fn sample_individual<R: Rng + ?Sized>(&self, rng: &mut R) -> Individual {
        let target_len = rng.gen_range(1..=self.max_test_size);
        let mut actions = Vec::with_capacity(target_len);
        while actions.len() < target_len {
            let t = rng.gen_range(0..self.schema.templates.len());
            let mut chain = self.sample_chain(t, actions.len(), rng);
            if actions.len() + chain.len() > target_len {
                // No room for the creation call: keep the dependent action alone.
                let mut last = chain.pop().expect("chain is never empty");
                last.path_override = None;
                chain = vec![last];
            }
            actions.extend(chain);
        }
        let auth_index = self.sample_auth(rng);
        Individual { actions, auth_index }
    }

    fn sample_auth<R: Rng + ?Sized>(&self, rng: &mut R) -> Option<usize> {
        let choice = rng.gen_range(0..=self.auth_count);
        (choice > 0).then(|| choice - 1)
    }

    pub fn applicable_arms(&self, ind: &Individual) -> Vec<MutationArm> {
        let mut arms = Vec::with_capacity(5);
        if ind.actions.iter().any(|a| a.count(is_mutation_point) > 0) {
            arms.push(MutationArm::Gene);
        }
        if ind.actions.iter().any(|a| a.count(is_optional) > 0) {
            arms.push(MutationArm::ToggleOptional);
        }
        if ind.len() < self.max_test_size {
            arms.push(MutationArm::AddAction);
        }
        if ind.len() > 1 {
            arms.push(MutationArm::RemoveAction);
        }
        if self.auth_count > 0 {
            arms.push(MutationArm::ChangeAuth);
        }
        arms
    }

    /// Returns a copy of `ind` with exactly one mutation applied, chosen uniformly
    /// among the applicable arms.
    pub fn mutate_individual<R: Rng + ?Sized>(&self, ind: &Individual, rng: &mut R) -> Individual {
        let arms = self.applicable_arms(ind);
        if arms.is_empty() {
            return ind.clone();
        }
        let arm = arms[rng.gen_range(0..arms.len())];
        self.mutate_with(ind, arm, rng)
    }

    /// Applies `arm` to a copy of `ind`. Inapplicable arms leave the copy unchanged.
    pub fn mutate_with<R: Rng + ?Sized>(&self, ind: &Individual, arm: MutationArm, rng: &mut R) -> Individual {
        let mut out = ind.clone();
        match arm {
            MutationArm::Gene => mutate_nth(&mut out, is_mutation_point, rng, mutate_in_place),
            MutationArm::ToggleOptional => mutate_nth(&mut out, is_optional, rng, |g, _| {
                if let Gene::Optional { active, .. } = g {
                    *active = !*active;
                }
            }),
            MutationArm::AddAction => {
                if out.len() < self.max_test_size {
                    self.add_action(&mut out, rng);
                }
            }
            MutationArm::RemoveAction => {
                if out.len() > 1 {
                    let at = rng.gen_range(0..out.len());
                    self.remove_action(&mut out, at, rng);
                }
            }
            MutationArm::ChangeAuth => {
                if self.auth_count > 0 {
                    // Uniform over the other choices in {none} ∪ credentials.
                    let current = out.auth_index.map_or(0, |a| a + 1);
                    let mut choice = rng.gen_range(0..self.auth_count);
                    if choice >= current {
                        choice += 1;
                    }
                    out.auth_index = (choice > 0).then(|| choice - 1);
                }
            }
        }
        out
    }

    fn add_action<R: Rng + ?Sized>(&self, ind: &mut Individual, rng: &mut R) {
        let at = rng.gen_range(0..=ind.len());
        let t = rng.gen_range(0..self.schema.templates.len());
        let mut action = self.sample_action(t, rng);
        for a in &mut ind.actions[at..] {
            if let Some(link) = &mut a.path_override {
                if link.source_action >= at {
                    link.source_action += 1;
                }
            }
        }
        if let Some(link) = &self.links[t] {
            let source = ind.actions[..at].iter().rposition(|a| a.template_index == link.creation);
            if let Some(source) = source {
                if rng.gen_bool(CHAIN_PROBABILITY) {
                    action.path_override = Some(ResourceLink {
                        source_action: source,
                        creation_path: self.schema.templates[link.creation].full_path(),
                    });
                }
            }
        }
        ind.actions.insert(at, action);
    }

    /// Removes the action at `at`. Links to it are cleared and the dependent
    /// action's id gene re-randomized; later links are re-indexed.
    pub fn remove_action<R: Rng + ?Sized>(&self, ind: &mut Individual, at: usize, rng: &mut R) {
        ind.actions.remove(at);
        for a in &mut ind.actions[at..] {
            let Some(link) = &mut a.path_override else { continue };
            if link.source_action == at {
                a.path_override = None;
                if let Some(cl) = &self.links[a.template_index] {
                    if let Some(pg) = a
                        .genes
                        .iter_mut()
                        .find(|g| g.location == ParamLocation::Path && g.name == cl.id_placeholder)
                    {
                        pg.gene.randomize(rng);
                    }
                }
            } else if link.source_action > at {
                link.source_action -= 1;
            }
        }
    }
}

fn mutate_nth<R: Rng + ?Sized>(
    ind: &mut Individual,
    pred: fn(&Gene) -> bool,
    rng: &mut R,
    op: fn(&mut Gene, &mut R),
) {
    let total: usize = ind.actions.iter().map(|a| a.count(pred)).sum();
    if total == 0 {
        return;
    }
    let mut n = rng.gen_range(0..total);
    for a in &mut ind.actions {
        if let Some(g) = a.nth_mut(&mut n, pred) {
            op(g, rng);
            return;
        }
    }
}
