//! MovingAI `.map` text format.

use super::MapError;
use crate::grid::Grid;

fn header_value(line: Option<(usize, &str)>, key: &str) -> Result<usize, MapError> {
    let (no, text) = line.ok_or(MapError::Parse {
        line: 0,
        msg: format!("missing `{key}` line"),
    })?;
    let rest = text
        .strip_prefix(key)
        .and_then(|r| r.strip_prefix(' '))
        .ok_or_else(|| MapError::Parse {
            line: no,
            msg: format!("expected `{key} <n>`, found `{text}`"),
        })?;
    rest.trim().parse().map_err(|_| MapError::Parse {
        line: no,
        msg: format!("`{key}` is not a number: `{rest}`"),
    })
}

/// Parse MovingAI map text. `.` and `G` are free; `@`, `T` and `O` are blocked.
pub fn load_map(text: &str) -> Result<Grid, MapError> {
    let mut lines = text
        .lines()
        .map(|l| l.trim_end_matches('\r'))
        .enumerate()
        .map(|(i, l)| (i + 1, l));
    match lines.next() {
        Some((_, "type octile")) => {}
        Some((no, other)) => {
            return Err(MapError::Parse {
                line: no,
                msg: format!("expected `type octile`, found `{other}`"),
            })
        }
        None => {
            return Err(MapError::Parse {
                line: 1,
                msg: "empty map file".into(),
            })
        }
    }
    let height = header_value(lines.next(), "height")?;
    let width = header_value(lines.next(), "width")?;
    match lines.next() {
        Some((_, "map")) => {}
        Some((no, other)) => {
            return Err(MapError::Parse {
                line: no,
                msg: format!("expected `map`, found `{other}`"),
            })
        }
        None => {
            return Err(MapError::Parse {
                line: 4,
                msg: "missing `map` line".into(),
            })
        }
    }
    if width == 0 || height == 0 {
        return Err(MapError::Parse {
            line: 2,
            msg: format!("map dimensions must be positive, got {width}x{height}"),
        });
    }
    let mut blocked = Vec::with_capacity(width * height);
    for row in 0..height {
        let (no, line) = lines.next().ok_or(MapError::Parse {
            line: 5 + row,
            msg: format!("expected {height} map rows, found {row}"),
        })?;
        let n = line.chars().count();
        if n != width {
            return Err(MapError::Parse {
                line: no,
                msg: format!("row has {n} characters, expected {width}"),
            });
        }
        for (col, c) in line.chars().enumerate() {
            blocked.push(match c {
                '.' | 'G' => false,
                '@' | 'T' | 'O' => true,
                other => {
                    return Err(MapError::Parse {
                        line: no,
                        msg: format!("unknown map character `{other}` at column {}", col + 1),
                    })
                }
            });
        }
    }
    if let Some((no, extra)) = lines.find(|(_, l)| !l.trim().is_empty()) {
        return Err(MapError::Parse {
            line: no,
            msg: format!("unexpected content after the map rows: `{extra}`"),
        });
    }
    Ok(Grid::new(width, height, blocked)?)
}

/// Canonical text: `.` for free cells, `@` for obstacles.
pub fn save_map(grid: &Grid) -> String {
    let mut out = format!("type octile\nheight {}\nwidth {}\nmap\n", grid.height(), grid.width());
    for row in grid.blocked_mask().chunks(grid.width()) {
        out.extend(row.iter().map(|&b| if b { '@' } else { '.' }));
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Pos;

    #[test]
    fn small_map_and_character_classes() {
        let g = load_map("type octile\nheight 2\nwidth 2\nmap\n..\n..\n").unwrap();
        assert_eq!(g.free_count(), 4);
        let g = load_map("type octile\nheight 2\nwidth 3\nmap\n.TG\nO@.\n").unwrap();
        assert!(!g.is_free(Pos::new(0, 1)));
        assert!(g.is_free(Pos::new(0, 2)));
        assert_eq!(g.free_count(), 3);
    }

    #[test]
    fn round_trip_canonicalizes() {
        let text = "type octile\r\nheight 2\r\nwidth 3\r\nmap\r\n.TG\r\nO@.\r\n\n";
        let saved = save_map(&load_map(text).unwrap());
        assert_eq!(saved, "type octile\nheight 2\nwidth 3\nmap\n.@.\n@@.\n");
        assert_eq!(save_map(&load_map(&saved).unwrap()), saved);
    }

    #[test]
    fn errors_carry_line_numbers() {
        let line_of = |t: &str| match load_map(t) {
            Err(MapError::Parse { line, .. }) => line,
            other => panic!("expected parse error, got {other:?}"),
        };
        assert_eq!(line_of("type grid\nheight 1\nwidth 1\nmap\n.\n"), 1);
        assert_eq!(line_of("type octile\nheight x\nwidth 1\nmap\n.\n"), 2);
        assert_eq!(line_of("type octile\nheight 1\nwidth 1\nmaps\n.\n"), 4);
        assert_eq!(line_of("type octile\nheight 2\nwidth 2\nmap\n..\n.\n"), 6);
        assert_eq!(line_of("type octile\nheight 2\nwidth 2\nmap\n..\n.x\n"), 6);
        assert_eq!(line_of("type octile\nheight 2\nwidth 2\nmap\n..\n"), 6);
        assert_eq!(line_of("type octile\nheight 1\nwidth 1\nmap\n.\n.\n"), 6);
    }
}
