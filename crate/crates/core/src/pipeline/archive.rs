//! Deterministic ustar archives for the packed pipeline results: members
//! sorted by name, fixed permissions, zeroed owner and timestamps, so that
//! equal inputs always produce byte-identical archives. Readable by any
//! tar implementation.

use thiserror::Error;

const BLOCK: usize = 512;
const NAME_MAX: usize = 100;

#[derive(Debug, Error)]
pub enum ArchiveError {
    #[error("member name {0:?} is empty or longer than 100 bytes")]
    BadName(String),
    #[error("archive ends mid-member")]
    Truncated,
    #[error("header checksum mismatch at block {0}")]
    BadChecksum(usize),
    #[error("unsupported or corrupt header at block {0}: {1}")]
    BadHeader(usize, String),
}

/// One archive member: a relative path and its contents.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ArchiveEntry {
    pub name: String,
    pub data: Vec<u8>,
}

fn octal_field(out: &mut [u8], value: u64) {
    // Zero-padded octal, NUL terminator; field width fixed by the caller.
    let digits = out.len() - 1;
    let text = format!("{value:0width$o}", width = digits);
    out[..digits].copy_from_slice(text.as_bytes());
    out[digits] = 0;
}

fn header_for(name: &str, size: u64) -> Result<[u8; BLOCK], ArchiveError> {
    if name.is_empty() || name.len() > NAME_MAX {
        return Err(ArchiveError::BadName(name.to_string()));
    }
    let mut h = [0u8; BLOCK];
    h[..name.len()].copy_from_slice(name.as_bytes());
    octal_field(&mut h[100..108], 0o644); // mode
    octal_field(&mut h[108..116], 0); // uid
    octal_field(&mut h[116..124], 0); // gid
    octal_field(&mut h[124..136], size);
    octal_field(&mut h[136..148], 0); // mtime
    h[148..156].fill(b' '); // checksum placeholder
    h[156] = b'0'; // regular file
    h[257..263].copy_from_slice(b"ustar\0");
    h[263..265].copy_from_slice(b"00");
    octal_field(&mut h[329..337], 0); // devmajor
    octal_field(&mut h[337..345], 0); // devminor

    let sum: u64 = h.iter().map(|&b| b as u64).sum();
    let text = format!("{sum:06o}");
    h[148..154].copy_from_slice(text.as_bytes());
    h[154] = 0;
    h[155] = b' ';
    Ok(h)
}

/// Packs entries into an uncompressed ustar stream. Members are sorted by
/// name; when a name repeats, the last occurrence wins.
pub fn pack(entries: &[ArchiveEntry]) -> Result<Vec<u8>, ArchiveError> {
    let mut by_name: std::collections::BTreeMap<&str, &ArchiveEntry> = Default::default();
    for e in entries {
        by_name.insert(&e.name, e);
    }
    let mut out = Vec::new();
    for e in by_name.values() {
        out.extend_from_slice(&header_for(&e.name, e.data.len() as u64)?);
        out.extend_from_slice(&e.data);
        let pad = (BLOCK - e.data.len() % BLOCK) % BLOCK;
        out.extend(std::iter::repeat_n(0u8, pad));
    }
    out.extend(std::iter::repeat_n(0u8, 2 * BLOCK));
    Ok(out)
}

fn parse_octal(bytes: &[u8]) -> Option<u64> {
    let text: Vec<u8> = bytes
        .iter()
        .copied()
        .take_while(|&b| b != 0)
        .filter(|&b| b != b' ')
        .collect();
    if text.is_empty() {
        return Some(0);
    }
    let mut value: u64 = 0;
    for b in text {
        if !(b'0'..=b'7').contains(&b) {
            return None;
        }
        value = value.checked_mul(8)?.checked_add((b - b'0') as u64)?;
    }
    Some(value)
}

/// Reads every regular-file member back out of a ustar stream.
pub fn unpack(bytes: &[u8]) -> Result<Vec<ArchiveEntry>, ArchiveError> {
    let mut entries = Vec::new();
    let mut block = 0usize;
    loop {
        let start = block * BLOCK;
        let Some(header) = bytes.get(start..start + BLOCK) else {
            // Missing the terminating zero blocks; tolerate a clean end.
            if start == bytes.len() {
                return Ok(entries);
            }
            return Err(ArchiveError::Truncated);
        };
        if header.iter().all(|&b| b == 0) {
            return Ok(entries);
        }

        let stored = parse_octal(&header[148..156])
            .ok_or_else(|| ArchiveError::BadHeader(block, "bad checksum field".into()))?;
        let mut sum: u64 = header.iter().map(|&b| b as u64).sum();
        for &b in &header[148..156] {
            sum = sum - b as u64 + b' ' as u64;
        }
        if sum != stored {
            return Err(ArchiveError::BadChecksum(block));
        }

        let name_end = header[..NAME_MAX]
            .iter()
            .position(|&b| b == 0)
            .unwrap_or(NAME_MAX);
        let name = std::str::from_utf8(&header[..name_end])
            .map_err(|_| ArchiveError::BadHeader(block, "non-UTF-8 name".into()))?
            .to_string();
        let size = parse_octal(&header[124..136])
            .ok_or_else(|| ArchiveError::BadHeader(block, "bad size field".into()))?
            as usize;
        let typeflag = header[156];

        let data_start = start + BLOCK;
        let data = bytes
            .get(data_start..data_start + size)
            .ok_or(ArchiveError::Truncated)?;
        if typeflag == b'0' || typeflag == 0 {
            entries.push(ArchiveEntry {
                name,
                data: data.to_vec(),
            });
        }
        block += 1 + size.div_ceil(BLOCK);
    }
}
