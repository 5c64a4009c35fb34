//! Conway's Game of Life on a fixed-size board.
//!
//! The board is the visible window. By default everything outside it is
//! permanently dead; [`Boundary::Toroidal`] wraps edges instead.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Episode, Frame};
use crate::error::{Error, Result};
use crate::rng::{self, Rng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    #[default]
    Dead,
    Toroidal,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Board {
    height: usize,
    width: usize,
    cells: Vec<bool>,
}

impl Board {
    pub fn empty(height: usize, width: usize) -> Self {
        Self {
            height,
            width,
            cells: vec![false; height * width],
        }
    }

    pub fn from_cells(height: usize, width: usize, cells: Vec<bool>) -> Result<Self> {
        if cells.len() != height * width {
            return Err(Error::invalid(
                "board",
                format!("{height}×{width} board needs {} cells", height * width),
            ));
        }
        Ok(Self {
            height,
            width,
            cells,
        })
    }

    /// Parses rows of `#`/`O` (alive) and `.` (dead).
    pub fn parse(rows: &[&str]) -> Result<Self> {
        let height = rows.len();
        let width = rows.first().map_or(0, |r| r.len());
        let mut cells = Vec::with_capacity(height * width);
        for r in rows {
            if r.len() != width {
                return Err(Error::invalid("board", "ragged rows"));
            }
            cells.extend(r.chars().map(|c| matches!(c, '#' | 'O')));
        }
        Self::from_cells(height, width, cells)
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn cells(&self) -> &[bool] {
        &self.cells
    }

    pub fn get(&self, row: usize, col: usize) -> bool {
        self.cells[row * self.width + col]
    }

    pub fn set(&mut self, row: usize, col: usize, alive: bool) {
        self.cells[row * self.width + col] = alive;
    }

    pub fn alive_count(&self) -> usize {
        self.cells.iter().filter(|&&c| c).count()
    }

    /// Alive cells in row-major order.
    pub fn alive_cells(&self) -> Vec<(usize, usize)> {
        (0..self.cells.len())
            .filter(|&i| self.cells[i])
            .map(|i| (i / self.width, i % self.width))
            .collect()
    }

    pub fn step(&self) -> Board {
        self.step_with(Boundary::Dead)
    }

    /// One simultaneous update: 3 alive neighbours → alive, 2 → unchanged,
    /// anything else → dead.
    pub fn step_with(&self, boundary: Boundary) -> Board {
        let (h, w) = (self.height, self.width);
        let mut next = vec![false; h * w];
        // Row-sum trick: count each column's vertical triple once, then sum
        // three adjacent columns.
        let mut col_sums = vec![0u8; w + 2];
        for r in 0..h {
            for c in 0..w {
                let mut s = 0u8;
                for dr in [-1isize, 0, 1] {
                    let rr = r as isize + dr;
                    let rr = match boundary {
                        Boundary::Dead if rr < 0 || rr >= h as isize => continue,
                        Boundary::Dead => rr as usize,
                        Boundary::Toroidal => rr.rem_euclid(h as isize) as usize,
                    };
                    s += self.cells[rr * w + c] as u8;
                }
                col_sums[c + 1] = s;
            }
            match boundary {
                Boundary::Dead => {
                    col_sums[0] = 0;
                    col_sums[w + 1] = 0;
                }
                Boundary::Toroidal => {
                    col_sums[0] = col_sums[w];
                    col_sums[w + 1] = col_sums[1];
                }
            }
            for c in 0..w {
                let alive = self.cells[r * w + c];
                let n = col_sums[c] + col_sums[c + 1] + col_sums[c + 2] - alive as u8;
                next[r * w + c] = n == 3 || (n == 2 && alive);
            }
        }
        Board {
            height: h,
            width: w,
            cells: next,
        }
    }

    /// Nearest-neighbour block replication by `factor` on both axes.
    pub fn upscale(&self, factor: usize) -> Result<Board> {
        if factor == 0 {
            return Err(Error::invalid("upscale", "factor must be at least 1"));
        }
        let (h, w) = (self.height * factor, self.width * factor);
        let cells = (0..h * w)
            .map(|i| self.get(i / w / factor, i % w / factor))
            .collect();
        Ok(Board {
            height: h,
            width: w,
            cells,
        })
    }

    /// Single-channel frame: alive → 1.0, dead → 0.0.
    pub fn render(&self) -> Frame {
        let data = self.cells.iter().map(|&c| c as u8 as f64).collect();
        Frame::new(1, self.height, self.width, data).expect("board dims")
    }

    /// Inverse of [`Board::render`] after thresholding at 0.5.
    pub fn from_frame(frame: &Frame) -> Board {
        let plane = &frame.data()[..frame.height() * frame.width()];
        Board {
            height: frame.height(),
            width: frame.width(),
            cells: plane.iter().map(|&v| v >= 0.5).collect(),
        }
    }

    pub fn place(&self, pattern: &Pattern, anchor: (usize, usize)) -> Result<Board> {
        place_pattern(self, pattern, anchor)
    }
}

/// Each cell alive independently with probability `density`.
pub fn random_board(height: usize, width: usize, density: f64, rng: &mut Rng) -> Result<Board> {
    if !(0.0..=1.0).contains(&density) {
        return Err(Error::invalid(
            "random_board",
            format!("density {density} outside [0, 1]"),
        ));
    }
    let cells = (0..height * width)
        .map(|_| rng.random::<f64>() < density)
        .collect();
    Board::from_cells(height, width, cells)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Pattern {
    pub name: String,
    pub offsets: Vec<(usize, usize)>,
}

impl Pattern {
    fn from_rows(name: &str, rows: &[&str]) -> Pattern {
        let offsets = rows
            .iter()
            .enumerate()
            .flat_map(|(r, row)| {
                row.chars()
                    .enumerate()
                    .filter(|(_, ch)| *ch == '#')
                    .map(move |(c, _)| (r, c))
            })
            .collect();
        Pattern {
            name: name.to_string(),
            offsets,
        }
    }

    /// Moves one cell down and one right every four generations.
    pub fn glider() -> Pattern {
        Self::from_rows("glider", &[".#.", "..#", "###"])
    }

    pub fn block() -> Pattern {
        Self::from_rows("block", &["##", "##"])
    }

    pub fn blinker() -> Pattern {
        Self::from_rows("blinker", &["###"])
    }

    pub fn beehive() -> Pattern {
        Self::from_rows("beehive", &[".##.", "#..#", ".##."])
    }

    pub fn lwss() -> Pattern {
        Self::from_rows("lwss", &[".#..#", "#....", "#...#", "####."])
    }

    pub fn library() -> Vec<Pattern> {
        vec![
            Self::glider(),
            Self::block(),
            Self::blinker(),
            Self::beehive(),
            Self::lwss(),
        ]
    }

    pub fn by_name(name: &str) -> Option<Pattern> {
        Self::library().into_iter().find(|p| p.name == name)
    }
}

/// Empty board of the same size with only `pattern`'s cells alive.
pub fn place_pattern(board: &Board, pattern: &Pattern, anchor: (usize, usize)) -> Result<Board> {
    let mut out = Board::empty(board.height, board.width);
    for &(r, c) in &pattern.offsets {
        let (rr, cc) = (anchor.0 + r, anchor.1 + c);
        if rr >= board.height || cc >= board.width {
            return Err(Error::invalid(
                "place_pattern",
                format!(
                    "`{}` cell ({rr}, {cc}) outside {}×{} board",
                    pattern.name, board.height, board.width
                ),
            ));
        }
        out.set(rr, cc, true);
    }
    Ok(out)
}

/// Fraction of cells that differ between two equally sized boards.
pub fn flip_fraction(a: &Board, b: &Board) -> f64 {
    let flips = a.cells.iter().zip(&b.cells).filter(|(x, y)| x != y).count();
    flips as f64 / a.cells.len() as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenSpec {
    pub episodes: usize,
    pub steps_per_episode: usize,
    pub height: usize,
    pub width: usize,
    pub alive_density: f64,
    pub upscale_factor: usize,
    pub seed: u64,
    #[serde(default)]
    pub boundary: Boundary,
}

impl Default for GenSpec {
    fn default() -> Self {
        Self {
            episodes: 1000,
            steps_per_episode: 10,
            height: 128,
            width: 160,
            alive_density: 0.10,
            upscale_factor: 1,
            seed: 0,
            boundary: Boundary::Dead,
        }
    }
}

impl GenSpec {
    /// Board dimensions before upscaling.
    pub fn base_dims(&self) -> (usize, usize) {
        (
            self.height / self.upscale_factor,
            self.width / self.upscale_factor,
        )
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::invalid("gen_spec", msg));
        if self.episodes == 0 || self.steps_per_episode == 0 {
            return bad("episodes and steps_per_episode must be positive".into());
        }
        if self.height == 0 || self.width == 0 {
            return bad(format!("invalid frame size {}×{}", self.height, self.width));
        }
        if !(0.0..=1.0).contains(&self.alive_density) {
            return bad(format!("density {} outside [0, 1]", self.alive_density));
        }
        let f = self.upscale_factor;
        if f == 0 || self.height % f != 0 || self.width % f != 0 {
            return bad(format!(
                "upscale factor {f} must divide {}×{}",
                self.height, self.width
            ));
        }
        Ok(())
    }
}

/// Boards `b0, step(b0), …` of one episode, before upscaling.
pub fn episode_boards(spec: &GenSpec, index: usize) -> Result<Vec<Board>> {
    let (h, w) = spec.base_dims();
    let mut r = rng::stream(spec.seed, index as u64);
    let mut board = random_board(h, w, spec.alive_density, &mut r)?;
    let mut boards = Vec::with_capacity(spec.steps_per_episode);
    for _ in 0..spec.steps_per_episode {
        let next = board.step_with(spec.boundary);
        boards.push(board);
        board = next;
    }
    Ok(boards)
}

/// Episode `i` draws its initial board from its own stream, so any subset of
/// episodes can be regenerated independently.
pub fn generate_dataset(spec: &GenSpec) -> Result<Dataset> {
    spec.validate()?;
    let episodes = (0..spec.episodes)
        .map(|i| {
            let frames = episode_boards(spec, i)?
                .iter()
                .map(|b| Ok(b.upscale(spec.upscale_factor)?.render()))
                .collect::<Result<Vec<_>>>()?;
            Ok(Episode::new(frames))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Dataset::new("gol", episodes))
}

/// A single glider launched from the top-left corner towards the bottom
/// right, `frames` generations long.
pub fn glider_episode(height: usize, width: usize, frames: usize) -> Result<Episode> {
    let mut board = place_pattern(&Board::empty(height, width), &Pattern::glider(), (0, 0))?;
    let mut out = Vec::with_capacity(frames);
    for _ in 0..frames {
        out.push(board.render());
        board = board.step();
    }
    Ok(Episode::new(out))
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Independent rule: count the eight neighbours directly.
    fn naive_step(b: &Board) -> Board {
        let mut out = Board::empty(b.height(), b.width());
        for r in 0..b.height() {
            for c in 0..b.width() {
                let mut n = 0;
                for dr in -1i32..=1 {
                    for dc in -1i32..=1 {
                        if (dr, dc) == (0, 0) {
                            continue;
                        }
                        let (rr, cc) = (r as i32 + dr, c as i32 + dc);
                        if rr >= 0
                            && cc >= 0
                            && (rr as usize) < b.height()
                            && (cc as usize) < b.width()
                            && b.get(rr as usize, cc as usize)
                        {
                            n += 1;
                        }
                    }
                }
                let alive = b.get(r, c);
                out.set(r, c, n == 3 || (n == 2 && alive));
            }
        }
        out
    }

    fn shifted(cells: &[(usize, usize)], dr: usize, dc: usize) -> Vec<(usize, usize)> {
        cells.iter().map(|&(r, c)| (r + dr, c + dc)).collect()
    }

    #[test]
    fn empty_board_stays_empty() {
        let b = Board::empty(5, 7);
        assert_eq!(b.step(), b);
    }

    #[test]
    fn block_is_a_still_life() {
        let b = Board::parse(&["....", ".##.", ".##.", "...."]).unwrap();
        assert_eq!(b.step(), b);
    }

    #[test]
    fn blinker_has_period_two() {
        let b = place_pattern(&Board::empty(5, 5), &Pattern::blinker(), (2, 1)).unwrap();
        let once = b.step();
        assert_ne!(once, b);
        assert_eq!(once.alive_cells(), vec![(1, 2), (2, 2), (3, 2)]);
        assert_eq!(once.step(), b);
    }

    #[test]
    fn glider_translates_diagonally_every_four_steps() {
        let b = place_pattern(&Board::empty(20, 20), &Pattern::glider(), (0, 0)).unwrap();
        assert_eq!(b.alive_count(), 5);
        let after = b.step().step().step().step();
        assert_eq!(after.alive_cells(), shifted(&b.alive_cells(), 1, 1));
    }

    #[test]
    fn anchor_shift_translates_pattern() {
        let base = Board::empty(10, 10);
        let a = place_pattern(&base, &Pattern::glider(), (0, 0)).unwrap();
        let b = place_pattern(&base, &Pattern::glider(), (2, 3)).unwrap();
        assert_eq!(b.alive_cells(), shifted(&a.alive_cells(), 2, 3));
        assert!(place_pattern(&base, &Pattern::glider(), (8, 0)).is_err());
    }

    #[test]
    fn production_step_matches_naive_count() {
        let mut r = rng::from_seed(5);
        for _ in 0..50 {
            let b = random_board(17, 23, 0.35, &mut r).unwrap();
            assert_eq!(b.step(), naive_step(&b));
        }
    }

    #[test]
    fn toroidal_glider_wraps_around() {
        let b = place_pattern(&Board::empty(8, 8), &Pattern::glider(), (0, 0)).unwrap();
        let mut cur = b.clone();
        for _ in 0..32 {
            cur = cur.step_with(Boundary::Toroidal);
        }
        assert_eq!(cur, b);
    }

    #[test]
    fn random_board_statistics_and_determinism() {
        let mut r = rng::from_seed(1);
        assert_eq!(random_board(10, 10, 0.0, &mut r).unwrap().alive_count(), 0);

        let b = random_board(128, 160, 0.1, &mut rng::from_seed(9)).unwrap();
        let n = 128.0 * 160.0;
        let sigma = (n * 0.1 * 0.9f64).sqrt();
        assert!((b.alive_count() as f64 - 2048.0).abs() < 5.0 * sigma);

        let again = random_board(128, 160, 0.1, &mut rng::from_seed(9)).unwrap();
        assert_eq!(b, again);
        assert!(random_board(2, 2, 1.5, &mut r).is_err());
    }

    #[test]
    fn upscale_and_render() {
        let one = Board::parse(&["#"]).unwrap();
        let f = one.upscale(8).unwrap().render();
        assert_eq!(f.dims(), (1, 8, 8));
        assert!(f.data().iter().all(|&v| v == 1.0));

        let b = random_board(16, 20, 0.3, &mut rng::from_seed(2)).unwrap();
        assert_eq!(b.upscale(1).unwrap(), b);
        let big = b.upscale(8).unwrap();
        assert_eq!((big.height(), big.width()), (128, 160));
        assert_eq!(big.get(8 * 3 + 5, 8 * 7 + 2), b.get(3, 7));
        assert!(big.render().is_binary());
        assert!(b.upscale(0).is_err());
    }

    #[test]
    fn dataset_sizes_and_dynamics() {
        let spec = GenSpec {
            episodes: 1,
            steps_per_episode: 2,
            alive_density: 0.0,
            ..GenSpec::default()
        };
        let d = generate_dataset(&spec).unwrap();
        assert_eq!(d.num_frames(), 2);
        assert_eq!(d.episodes[0].frames[0], d.episodes[0].frames[1]);
        assert!(d.episodes[0].frames[0].data().iter().all(|&v| v == 0.0));

        let spec = GenSpec {
            episodes: 4,
            height: 24,
            width: 20,
            seed: 3,
            ..GenSpec::default()
        };
        let d = generate_dataset(&spec).unwrap();
        assert_eq!(d.num_frames(), 40);
        for ep in &d.episodes {
            for w in ep.frames.windows(2) {
                assert_eq!(Board::from_frame(&w[0]).step().render(), w[1]);
            }
        }
    }

    #[test]
    fn episodes_are_order_independent() {
        let spec = GenSpec {
            episodes: 5,
            height: 16,
            width: 16,
            seed: 11,
            ..GenSpec::default()
        };
        let d = generate_dataset(&spec).unwrap();
        let third = episode_boards(&spec, 3).unwrap();
        let frames: Vec<Frame> = third.iter().map(Board::render).collect();
        assert_eq!(d.episodes[3].frames, frames);
    }

    #[test]
    fn upscaled_generation() {
        let spec = GenSpec {
            episodes: 2,
            upscale_factor: 8,
            height: 128,
            width: 160,
            ..GenSpec::default()
        };
        assert_eq!(spec.base_dims(), (16, 20));
        let d = generate_dataset(&spec).unwrap();
        assert_eq!(d.frame_dims().unwrap(), (1, 128, 160));
        let bad = GenSpec {
            upscale_factor: 7,
            ..spec
        };
        assert!(generate_dataset(&bad).is_err());
    }
}
