//! Architecture descriptors and the flat parameter layout.
//!
//! Network: 3x3 stem convolution, pre-activation residual blocks (ReLU, conv,
//! ReLU, conv, skip), ReLU, an optional strided projection convolution (+ReLU),
//! flatten, a ReLU MLP, an optional GRU core, and linear actor/critic heads.
//! Parameters are stored layer by layer in exactly that order; each weight
//! tensor precedes its bias. Convolution weights are `[out][in][ky][kx]`, linear
//! weights `[out][in]`, GRU gate blocks are ordered reset, update, new.

use std::fmt;

pub const NUM_ACTIONS: usize = 5;
pub const INPUT_CHANNELS: usize = 2;

pub const FOLLOWER_PARAMS: usize = 5_150_406;
pub const FOLLOWER_LITE_PARAMS: usize = 3_678;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Projection {
    pub filters: usize,
    pub kernel: usize,
    pub stride: usize,
    pub padding: usize,
    pub bias: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Architecture {
    pub name: String,
    /// Side of the square network input (centre crop of the observation window).
    pub input_size: usize,
    pub filters: usize,
    pub res_blocks: usize,
    pub projection: Option<Projection>,
    pub mlp: Vec<usize>,
    pub gru_hidden: Option<usize>,
}

impl Architecture {
    /// 8 residual blocks of 64 filters, MLP 512, GRU 256 on the full 11x11 window.
    pub fn follower() -> Self {
        Self {
            name: "follower".into(),
            input_size: 11,
            filters: 64,
            res_blocks: 8,
            projection: None,
            mlp: vec![512],
            gru_hidden: Some(256),
        }
    }

    /// One residual block of 8 filters on a 7x7 crop, no recurrence.
    ///
    /// A bias-free 3x3 stride-2 projection to 6 channels and a second hidden
    /// layer of width 16 bring the total to the published 3,678 parameters.
    pub fn follower_lite() -> Self {
        Self {
            name: "followerlite".into(),
            input_size: 7,
            filters: 8,
            res_blocks: 1,
            projection: Some(Projection {
                filters: 6,
                kernel: 3,
                stride: 2,
                padding: 1,
                bias: false,
            }),
            mlp: vec![16, 16],
            gru_hidden: None,
        }
    }

    pub fn by_name(name: &str) -> Option<Self> {
        match name {
            "follower" => Some(Self::follower()),
            "followerlite" => Some(Self::follower_lite()),
            _ => None,
        }
    }

    /// Published parameter count for the named variants.
    pub fn pinned_param_count(&self) -> Option<usize> {
        match self.name.as_str() {
            "follower" => Some(FOLLOWER_PARAMS),
            "followerlite" => Some(FOLLOWER_LITE_PARAMS),
            _ => None,
        }
    }

    pub fn is_recurrent(&self) -> bool {
        self.gru_hidden.is_some()
    }

    pub fn memory_size(&self) -> usize {
        self.gru_hidden.unwrap_or(0)
    }

    pub fn input_len(&self) -> usize {
        INPUT_CHANNELS * self.input_size * self.input_size
    }

    /// Spatial side after the projection (or the input side without one).
    pub fn feature_side(&self) -> usize {
        match self.projection {
            Some(p) => (self.input_size + 2 * p.padding - p.kernel) / p.stride + 1,
            None => self.input_size,
        }
    }

    pub fn feature_channels(&self) -> usize {
        self.projection.map_or(self.filters, |p| p.filters)
    }

    pub fn core_size(&self) -> usize {
        self.gru_hidden.unwrap_or_else(|| {
            *self
                .mlp
                .last()
                .unwrap_or(&(self.feature_channels() * self.feature_side().pow(2)))
        })
    }

    pub fn layout(&self) -> Layout {
        Layout::new(self)
    }

    pub fn param_count(&self) -> usize {
        self.layout().total
    }
}

impl fmt::Display for Architecture {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.name)
    }
}

/// Offset and length of one tensor in the flat parameter vector.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Slot {
    pub offset: usize,
    pub len: usize,
}

impl Slot {
    pub fn range(&self) -> std::ops::Range<usize> {
        self.offset..self.offset + self.len
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConvSlots {
    pub weight: Slot,
    pub bias: Option<Slot>,
    pub in_ch: usize,
    pub out_ch: usize,
    pub kernel: usize,
    pub stride: usize,
    pub padding: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LinearSlots {
    pub weight: Slot,
    pub bias: Slot,
    pub inputs: usize,
    pub outputs: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GruSlots {
    pub w_ih: Slot,
    pub w_hh: Slot,
    pub b_ih: Slot,
    pub b_hh: Slot,
    pub inputs: usize,
    pub hidden: usize,
}

/// Per-layer breakdown of the flat parameter vector.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Layout {
    pub stem: ConvSlots,
    pub blocks: Vec<(ConvSlots, ConvSlots)>,
    pub projection: Option<ConvSlots>,
    pub mlp: Vec<LinearSlots>,
    pub gru: Option<GruSlots>,
    pub actor: LinearSlots,
    pub critic: LinearSlots,
    pub total: usize,
}

struct Cursor(usize);

impl Cursor {
    fn take(&mut self, len: usize) -> Slot {
        let s = Slot { offset: self.0, len };
        self.0 += len;
        s
    }

    fn conv(
        &mut self,
        in_ch: usize,
        out_ch: usize,
        kernel: usize,
        stride: usize,
        padding: usize,
        bias: bool,
    ) -> ConvSlots {
        let weight = self.take(out_ch * in_ch * kernel * kernel);
        let bias = bias.then(|| self.take(out_ch));
        ConvSlots {
            weight,
            bias,
            in_ch,
            out_ch,
            kernel,
            stride,
            padding,
        }
    }

    fn linear(&mut self, inputs: usize, outputs: usize) -> LinearSlots {
        LinearSlots {
            weight: self.take(inputs * outputs),
            bias: self.take(outputs),
            inputs,
            outputs,
        }
    }
}

impl Layout {
    fn new(arch: &Architecture) -> Self {
        let mut c = Cursor(0);
        let f = arch.filters;
        let stem = c.conv(INPUT_CHANNELS, f, 3, 1, 1, true);
        let blocks = (0..arch.res_blocks)
            .map(|_| (c.conv(f, f, 3, 1, 1, true), c.conv(f, f, 3, 1, 1, true)))
            .collect();
        let projection = arch
            .projection
            .map(|p| c.conv(f, p.filters, p.kernel, p.stride, p.padding, p.bias));
        let mut width = arch.feature_channels() * arch.feature_side().pow(2);
        let mut mlp = Vec::with_capacity(arch.mlp.len());
        for &h in &arch.mlp {
            mlp.push(c.linear(width, h));
            width = h;
        }
        let gru = arch.gru_hidden.map(|h| {
            let g = GruSlots {
                w_ih: c.take(3 * h * width),
                w_hh: c.take(3 * h * h),
                b_ih: c.take(3 * h),
                b_hh: c.take(3 * h),
                inputs: width,
                hidden: h,
            };
            width = h;
            g
        });
        let actor = c.linear(width, NUM_ACTIONS);
        let critic = c.linear(width, 1);
        Self {
            stem,
            blocks,
            projection,
            mlp,
            gru,
            actor,
            critic,
            total: c.0,
        }
    }

    /// Human-readable `name: count` lines, one per tensor.
    pub fn describe(&self) -> Vec<(String, usize)> {
        let mut out = vec![("stem.weight".to_string(), self.stem.weight.len)];
        if let Some(b) = self.stem.bias {
            out.push(("stem.bias".into(), b.len));
        }
        for (i, (a, b)) in self.blocks.iter().enumerate() {
            for (j, conv) in [a, b].into_iter().enumerate() {
                out.push((format!("block{i}.conv{j}.weight"), conv.weight.len));
                if let Some(s) = conv.bias {
                    out.push((format!("block{i}.conv{j}.bias"), s.len));
                }
            }
        }
        if let Some(p) = &self.projection {
            out.push(("projection.weight".into(), p.weight.len));
            if let Some(s) = p.bias {
                out.push(("projection.bias".into(), s.len));
            }
        }
        for (i, l) in self.mlp.iter().enumerate() {
            out.push((format!("mlp{i}.weight"), l.weight.len));
            out.push((format!("mlp{i}.bias"), l.bias.len));
        }
        if let Some(g) = &self.gru {
            out.push(("gru.weight_ih".into(), g.w_ih.len));
            out.push(("gru.weight_hh".into(), g.w_hh.len));
            out.push(("gru.bias_ih".into(), g.b_ih.len));
            out.push(("gru.bias_hh".into(), g.b_hh.len));
        }
        out.push(("actor.weight".into(), self.actor.weight.len));
        out.push(("actor.bias".into(), self.actor.bias.len));
        out.push(("critic.weight".into(), self.critic.weight.len));
        out.push(("critic.bias".into(), self.critic.bias.len));
        out
    }
}
