//! Four-group semantic codes (Z space), style codes (W space), the per-group
//! mapping networks, and group-wise mixing.

use std::fmt;
use std::str::FromStr;

use morpheus_tensor::{Binding, Graph, ParamStore, Tensor, Var};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{Activation, Linear};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Group {
    Id,
    Expr,
    Tex,
    Light,
}

impl Group {
    pub const ALL: [Group; 4] = [Group::Id, Group::Expr, Group::Tex, Group::Light];

    pub fn name(self) -> &'static str {
        match self {
            Group::Id => "id",
            Group::Expr => "expr",
            Group::Tex => "tex",
            Group::Light => "light",
        }
    }

    /// Parses a list of group names, rejecting unknown ones.
    pub fn parse_list<S: AsRef<str>>(names: &[S]) -> Result<Vec<Group>> {
        names.iter().map(|n| n.as_ref().parse()).collect()
    }
}

impl fmt::Display for Group {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Group {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Group::ALL
            .into_iter()
            .find(|g| g.name() == s)
            .ok_or_else(|| Error::arg("groups", format!("unknown group {s:?} (id|expr|tex|light)")))
    }
}

/// One value per semantic group, in the fixed order id, expr, tex, light.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Groups<V> {
    pub id: V,
    pub expr: V,
    pub tex: V,
    pub light: V,
}

impl<V> Groups<V> {
    pub fn from_fn(mut f: impl FnMut(Group) -> V) -> Self {
        Groups { id: f(Group::Id), expr: f(Group::Expr), tex: f(Group::Tex), light: f(Group::Light) }
    }

    pub fn get(&self, g: Group) -> &V {
        match g {
            Group::Id => &self.id,
            Group::Expr => &self.expr,
            Group::Tex => &self.tex,
            Group::Light => &self.light,
        }
    }

    pub fn get_mut(&mut self, g: Group) -> &mut V {
        match g {
            Group::Id => &mut self.id,
            Group::Expr => &mut self.expr,
            Group::Tex => &mut self.tex,
            Group::Light => &mut self.light,
        }
    }

    pub fn map<U>(&self, mut f: impl FnMut(Group, &V) -> U) -> Groups<U> {
        Groups::from_fn(|g| f(g, self.get(g)))
    }

    pub fn iter(&self) -> impl Iterator<Item = (Group, &V)> {
        Group::ALL.into_iter().map(move |g| (g, self.get(g)))
    }
}

pub type CodeDims = Groups<usize>;

impl CodeDims {
    pub fn total(&self) -> usize {
        self.id + self.expr + self.tex + self.light
    }
}

/// Encoder-space code z.
pub type SemanticCode = Groups<Vec<f32>>;

impl SemanticCode {
    pub fn zeros(dims: &CodeDims) -> Self {
        dims.map(|_, &d| vec![0.0; d])
    }

    pub fn dims(&self) -> CodeDims {
        self.map(|_, v| v.len())
    }

    /// Checks group dimensions against `dims` and that every entry is finite.
    pub fn validate(&self, dims: &CodeDims) -> Result<()> {
        for (g, v) in self.iter() {
            let want = *dims.get(g);
            if v.len() != want {
                return Err(Error::arg(
                    format!("code.{g}"),
                    format!("expected {want} values, got {}", v.len()),
                ));
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::arg(format!("code.{g}"), "non-finite value"));
            }
        }
        Ok(())
    }

    /// `z + dz` group-wise.
    pub fn apply_offset(&self, dz: &SemanticCode) -> Result<SemanticCode> {
        dz.validate(&self.dims())?;
        Ok(self.map(|g, v| v.iter().zip(dz.get(g)).map(|(a, b)| a + b).collect()))
    }

    /// Squared L2 norm of each group.
    pub fn sq_norms(&self) -> Groups<f64> {
        self.map(|_, v| v.iter().map(|&x| (x as f64) * (x as f64)).sum())
    }
}

/// Takes the listed groups from `target` and the rest from `source`.
pub fn mix_codes(source: &SemanticCode, target: &SemanticCode, groups: &[Group]) -> Result<SemanticCode> {
    target.validate(&source.dims())?;
    Ok(Groups::from_fn(|g| {
        if groups.contains(&g) { target.get(g).clone() } else { source.get(g).clone() }
    }))
}

/// Mapped code w, same layout as [`SemanticCode`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct StyleCode(pub Groups<Vec<f32>>);

impl StyleCode {
    /// `[w_id | w_expr]`, the radiance-field conditioning.
    pub fn shape_condition(&self) -> Vec<f32> {
        [self.0.id.as_slice(), &self.0.expr].concat()
    }

    /// `[w_tex | w_light]`, the render-block conditioning.
    pub fn appearance_condition(&self) -> Vec<f32> {
        [self.0.tex.as_slice(), &self.0.light].concat()
    }
}

/// Graph-side conditioning vectors, each `[1, dim]`.
pub fn shape_condition_var<'g>(w: &Groups<Var<'g>>) -> Var<'g> {
    Var::concat(&[w.id, w.expr], 1)
}

pub fn appearance_condition_var<'g>(w: &Groups<Var<'g>>) -> Var<'g> {
    Var::concat(&[w.tex, w.light], 1)
}

/// Lifts a code into the graph as `[1, dim]` constants.
pub fn code_constants<'g>(g: &'g Graph<f32>, z: &SemanticCode) -> Groups<Var<'g>> {
    z.map(|_, v| g.constant(Tensor::from_slice(vec![1, v.len()], v)))
}

/// Reads `[1, dim]` graph values back into a code.
pub fn code_values(vars: &Groups<Var<'_>>) -> SemanticCode {
    vars.map(|_, v| v.value().data().to_vec())
}

/// One feed-forward network per group, input and output width = group dim.
#[derive(Clone, Debug)]
pub struct MappingNetworks {
    nets: Groups<Vec<Linear>>,
}

impl MappingNetworks {
    pub fn new(store: &mut ParamStore, dims: &CodeDims, hidden_layers: usize, rng: &mut impl Rng) -> Self {
        let nets = dims.map(|g, &d| {
            (0..=hidden_layers)
                .map(|i| {
                    let act = if i < hidden_layers { Activation::LeakyRelu } else { Activation::Linear };
                    Linear::new(store, &format!("mapping.{g}.layer{i}"), d, d, act, rng)
                })
                .collect()
        });
        Self { nets }
    }

    pub fn forward<'g>(&self, b: &Binding<'g>, z: &Groups<Var<'g>>) -> Groups<Var<'g>> {
        self.nets.map(|g, layers| {
            let last = layers.len() - 1;
            layers.iter().enumerate().fold(*z.get(g), |x, (i, l)| {
                let y = l.forward(b, x);
                if i < last { y.leaky_relu(crate::nn::LEAKY_SLOPE) } else { y }
            })
        })
    }

    pub fn map_to_w(&self, store: &ParamStore, z: &SemanticCode) -> Result<StyleCode> {
        let dims = self.nets.map(|_, l| l[0].in_dim);
        z.validate(&dims).map_err(|e| Error::Config(e.to_string()))?;
        let g = Graph::new();
        let b = Binding::frozen(&g, store);
        let w = self.forward(&b, &code_constants(&g, z));
        Ok(StyleCode(code_values(&w)))
    }
}
