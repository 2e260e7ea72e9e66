use std::io::Write;

use crate::{Error, Result};

/// Writes a row-major mask as `rows` lines of comma-separated 0/1.
pub fn write_mask_csv<W: Write>(mask: &[bool], cols: usize, mut writer: W) -> Result<()> {
    if cols == 0 || mask.len() % cols != 0 {
        return Err(Error::Shape(format!("{} entries do not split into rows of {cols}", mask.len())));
    }
    for row in mask.chunks_exact(cols) {
        let line: Vec<&str> = row.iter().map(|&m| if m { "1" } else { "0" }).collect();
        writeln!(writer, "{}", line.join(","))?;
    }
    Ok(())
}

/// Binary PGM (P5); missing pixels are black, present pixels white.
pub fn write_pgm<W: Write>(mask: &[bool], height: usize, width: usize, mut writer: W) -> Result<()> {
    if mask.len() != height * width {
        return Err(Error::Shape(format!("{} pixels for a {height}x{width} image", mask.len())));
    }
    write!(writer, "P5\n{width} {height}\n255\n")?;
    let bytes: Vec<u8> = mask.iter().map(|&m| if m { 0 } else { 255 }).collect();
    writer.write_all(&bytes)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn formats() {
        let mask = [true, false, false, true];
        let mut csv = Vec::new();
        write_mask_csv(&mask, 2, &mut csv).unwrap();
        assert_eq!(String::from_utf8(csv).unwrap(), "1,0\n0,1\n");
        let mut pgm = Vec::new();
        write_pgm(&mask, 2, 2, &mut pgm).unwrap();
        assert_eq!(&pgm[..11], b"P5\n2 2\n255\n");
        assert_eq!(&pgm[11..], &[0, 255, 255, 0]);
        assert!(write_pgm(&mask, 3, 2, &mut Vec::new()).is_err());
    }
}
