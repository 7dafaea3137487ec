//! `FOLLOWER-CKPT v1 <arch> <count>` header line followed by little-endian f32 parameters.

use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use super::arch::Architecture;
use super::net::PolicyParams;
use super::PolicyError;

const MAGIC: &str = "FOLLOWER-CKPT";
const VERSION: &str = "v1";

pub fn write_checkpoint(mut w: impl Write, params: &PolicyParams) -> std::io::Result<()> {
    writeln!(w, "{MAGIC} {VERSION} {} {}", params.arch().name, params.len())?;
    let mut buf = Vec::with_capacity(params.len() * 4);
    for &v in params.values() {
        buf.extend_from_slice(&(v as f32).to_le_bytes());
    }
    w.write_all(&buf)?;
    w.flush()
}

pub fn read_checkpoint(r: impl Read) -> Result<PolicyParams, PolicyError> {
    let mut r = BufReader::new(r);
    let mut header = String::new();
    r.read_line(&mut header)?;
    let fields: Vec<&str> = header.trim_end_matches('\n').split(' ').collect();
    if fields.len() != 4 || fields[0] != MAGIC || fields[1] != VERSION {
        return Err(PolicyError::Checkpoint(format!("bad header `{}`", header.trim())));
    }
    let arch = Architecture::by_name(fields[2])
        .ok_or_else(|| PolicyError::Checkpoint(format!("unknown architecture `{}`", fields[2])))?;
    let count: usize = fields[3]
        .parse()
        .map_err(|_| PolicyError::Checkpoint(format!("bad parameter count `{}`", fields[3])))?;
    if count != arch.param_count() {
        return Err(PolicyError::ParamCount {
            arch: arch.name.clone(),
            expected: arch.param_count(),
            got: count,
        });
    }
    let mut bytes = Vec::with_capacity(count * 4);
    r.read_to_end(&mut bytes)?;
    if bytes.len() != count * 4 {
        return Err(PolicyError::Checkpoint(format!(
            "expected {} bytes of parameters, found {}",
            count * 4,
            bytes.len()
        )));
    }
    let values = bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
        .collect();
    PolicyParams::new(arch, values)
}

pub fn save_checkpoint(path: impl AsRef<Path>, params: &PolicyParams) -> std::io::Result<()> {
    let f = std::fs::File::create(path)?;
    write_checkpoint(std::io::BufWriter::new(f), params)
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<PolicyParams, PolicyError> {
    read_checkpoint(std::fs::File::open(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_f32_exact() {
        let p = PolicyParams::init_orthogonal(Architecture::follower_lite(), 9).unwrap();
        let mut buf = Vec::new();
        write_checkpoint(&mut buf, &p).unwrap();
        assert!(buf.starts_with(b"FOLLOWER-CKPT v1 followerlite 3678\n"));
        assert_eq!(buf.len(), "FOLLOWER-CKPT v1 followerlite 3678\n".len() + 3678 * 4);
        let q = read_checkpoint(&buf[..]).unwrap();
        for (a, b) in p.values().iter().zip(q.values()) {
            assert_eq!(*a as f32, *b as f32);
        }
    }

    #[test]
    fn mismatched_count_is_rejected() {
        let mut buf = b"FOLLOWER-CKPT v1 followerlite 12\n".to_vec();
        buf.extend_from_slice(&[0u8; 48]);
        assert!(matches!(read_checkpoint(&buf[..]), Err(PolicyError::ParamCount { .. })));
        let truncated = b"FOLLOWER-CKPT v1 followerlite 3678\n\0\0\0\0".to_vec();
        assert!(matches!(
            read_checkpoint(&truncated[..]),
            Err(PolicyError::Checkpoint(_))
        ));
        assert!(matches!(
            read_checkpoint(&b"garbage\n"[..]),
            Err(PolicyError::Checkpoint(_))
        ));
    }
}
