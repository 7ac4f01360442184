//! `signatures.bin`: a fixed header followed by one record per item.
//!
//! ```text
//! magic    4 bytes  b"MJSG"
//! version  u32 LE   1
//! num_perm u32 LE
//! seed     u64 LE
//! repeated until EOF:
//!   id_len u32 LE, item_id UTF-8 (id_len bytes), num_perm × u64 LE slots
//! ```

use std::io::{self, Read, Write};

use super::{DedupError, MinHashSignature};

pub const MAGIC: &[u8; 4] = b"MJSG";
pub const VERSION: u32 = 1;

fn bad(msg: impl Into<String>) -> DedupError {
    DedupError::SignatureFile(msg.into())
}

pub fn write_signatures<W: Write>(
    mut w: W,
    num_perm: usize,
    seed: u64,
    signatures: &[MinHashSignature],
) -> Result<(), DedupError> {
    let num_perm_u32 = u32::try_from(num_perm).map_err(|_| bad("num_perm exceeds u32"))?;
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&num_perm_u32.to_le_bytes())?;
    w.write_all(&seed.to_le_bytes())?;
    for sig in signatures {
        if sig.num_perm() != num_perm || sig.seed != seed {
            return Err(DedupError::SignatureMismatch {
                left: (num_perm, seed),
                right: (sig.num_perm(), sig.seed),
            });
        }
        let id = sig.item_id.as_bytes();
        let len = u32::try_from(id.len()).map_err(|_| bad("item id too long"))?;
        w.write_all(&len.to_le_bytes())?;
        w.write_all(id)?;
        for slot in &sig.slots {
            w.write_all(&slot.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

fn read_exact_or_eof<R: Read>(r: &mut R, buf: &mut [u8]) -> io::Result<bool> {
    let mut filled = 0;
    while filled < buf.len() {
        match r.read(&mut buf[filled..])? {
            0 if filled == 0 => return Ok(false),
            0 => return Err(io::ErrorKind::UnexpectedEof.into()),
            n => filled += n,
        }
    }
    Ok(true)
}

/// Returns `(num_perm, seed, signatures)`.
pub fn read_signatures<R: Read>(mut r: R) -> Result<(usize, u64, Vec<MinHashSignature>), DedupError> {
    let mut header = [0u8; 20];
    r.read_exact(&mut header).map_err(|_| bad("truncated header"))?;
    if &header[..4] != MAGIC {
        return Err(bad("bad magic"));
    }
    let version = u32::from_le_bytes(header[4..8].try_into().expect("4 bytes"));
    if version != VERSION {
        return Err(bad(format!("unsupported version {version}")));
    }
    let num_perm = u32::from_le_bytes(header[8..12].try_into().expect("4 bytes")) as usize;
    let seed = u64::from_le_bytes(header[12..20].try_into().expect("8 bytes"));

    let mut out = Vec::new();
    let mut len_buf = [0u8; 4];
    while read_exact_or_eof(&mut r, &mut len_buf).map_err(|_| bad("truncated record"))? {
        let len = u32::from_le_bytes(len_buf) as usize;
        let mut id = vec![0u8; len];
        r.read_exact(&mut id).map_err(|_| bad("truncated item id"))?;
        let item_id = String::from_utf8(id).map_err(|_| bad("item id is not UTF-8"))?;
        let mut raw = vec![0u8; num_perm * 8];
        r.read_exact(&mut raw).map_err(|_| bad("truncated slots"))?;
        let slots = raw
            .chunks_exact(8)
            .map(|c| u64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        out.push(MinHashSignature {
            item_id,
            seed,
            slots,
        });
    }
    Ok((num_perm, seed, out))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn round_trip(
            seed: u64,
            sigs in proptest::collection::vec(("[a-z0-9é]{0,12}", proptest::collection::vec(any::<u64>(), 4)), 0..5)
        ) {
            let sigs: Vec<_> = sigs
                .into_iter()
                .map(|(item_id, slots)| MinHashSignature { item_id, seed, slots })
                .collect();
            let mut buf = Vec::new();
            write_signatures(&mut buf, 4, seed, &sigs).unwrap();
            let (n, s, back) = read_signatures(buf.as_slice()).unwrap();
            prop_assert_eq!((n, s), (4, seed));
            prop_assert_eq!(back, sigs);
        }
    }

    #[test]
    fn header_layout_and_corruption() {
        let sig = MinHashSignature {
            item_id: "ab".into(),
            seed: 7,
            slots: vec![1, 2],
        };
        let mut buf = Vec::new();
        write_signatures(&mut buf, 2, 7, std::slice::from_ref(&sig)).unwrap();
        assert_eq!(&buf[..4], b"MJSG");
        assert_eq!(buf.len(), 20 + 4 + 2 + 16);
        assert_eq!(&buf[20..24], &2u32.to_le_bytes());

        assert!(read_signatures(&buf[..buf.len() - 3]).is_err());
        let mut wrong = buf.clone();
        wrong[0] = b'X';
        assert!(read_signatures(wrong.as_slice()).is_err());
        assert!(write_signatures(Vec::new(), 3, 7, &[sig]).is_err());
    }
}
