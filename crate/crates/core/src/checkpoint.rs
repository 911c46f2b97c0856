//! Binary checkpoint format for [`FusionNetwork`].
//!
//! Little-endian: magic `ANPM`, version `u16`, dims as four `u32`
//! (`n_adj, n_noun, hidden, n_anp`), then whitener mean, whitener std,
//! hidden weights (row-major), hidden biases, output weights, output biases,
//! each as a `u64` element count followed by `f32` values.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::binio::{LeReader, LeWriter};
use crate::fusion::{FusionDims, FusionNetwork, Whitener};
use crate::nn::DenseLayer;
use crate::Result;

pub const CHECKPOINT_MAGIC: [u8; 4] = *b"ANPM";
pub const CHECKPOINT_VERSION: u16 = 1;

pub fn write_checkpoint<W: Write>(net: &FusionNetwork, w: W) -> Result<W> {
    let d = net.dims();
    let mut out = LeWriter::new(w);
    out.bytes(&CHECKPOINT_MAGIC)?;
    out.u16(CHECKPOINT_VERSION)?;
    for v in [d.n_adj, d.n_noun, d.hidden, d.n_anp] {
        out.u32(v as u32)?;
    }
    out.counted_f32s(net.whitener().mean())?;
    out.counted_f32s(net.whitener().std())?;
    out.counted_f32s(net.hidden().weights())?;
    out.counted_f32s(net.hidden().biases())?;
    out.counted_f32s(net.output().weights())?;
    out.counted_f32s(net.output().biases())?;
    out.finish()
}

pub fn read_checkpoint<R: Read>(r: R) -> Result<FusionNetwork> {
    let mut inp = LeReader::new(r);
    inp.magic(CHECKPOINT_MAGIC)?;
    inp.version(CHECKPOINT_VERSION)?;
    let n_adj = inp.u32("n_adj")? as usize;
    let n_noun = inp.u32("n_noun")? as usize;
    let hidden = inp.u32("hidden size")? as usize;
    let n_anp = inp.u32("n_anp")? as usize;
    let dims = FusionDims::new(n_adj, n_noun, hidden, n_anp);
    let n_in = dims.input_dim();

    let mean = inp.counted_f32s(n_in, "whitener mean")?;
    let std = inp.counted_f32s(n_in, "whitener std")?;
    let hw = inp.counted_f32s(n_in * hidden, "hidden weights")?;
    let hb = inp.counted_f32s(hidden, "hidden biases")?;
    let ow = inp.counted_f32s(hidden * n_anp, "output weights")?;
    let ob = inp.counted_f32s(n_anp, "output biases")?;
    inp.expect_end()?;

    FusionNetwork::from_parts(
        dims,
        Whitener::new(mean, std)?,
        DenseLayer::new(n_in, hidden, hw, hb)?,
        DenseLayer::new(hidden, n_anp, ow, ob)?,
    )
}

pub fn save_checkpoint(net: &FusionNetwork, path: &Path) -> Result<()> {
    write_checkpoint(net, BufWriter::new(File::create(path)?))?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<FusionNetwork> {
    read_checkpoint(BufReader::new(File::open(path)?))
}
