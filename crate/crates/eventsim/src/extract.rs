//! Connected-component instance extraction: maximal 8-connected components
//! per class label, scanned in row-major order so the result is
//! deterministic.

use changecore::{Instance, SemanticMask};

const NEIGHBORS: [(i32, i32); 8] = [
    (-1, -1),
    (-1, 0),
    (-1, 1),
    (0, -1),
    (0, 1),
    (1, -1),
    (1, 0),
    (1, 1),
];

/// Every foreground pixel belongs to exactly one returned instance.
pub fn extract_instances(mask: &SemanticMask) -> Vec<Instance> {
    let (h, w) = mask.shape();
    let labels = mask.labels();
    let mut visited = vec![false; h * w];
    let mut out = Vec::new();
    let mut stack = Vec::new();
    for r in 0..h {
        for c in 0..w {
            let label = labels[(r, c)];
            if label == 0 || visited[r * w + c] {
                continue;
            }
            let mut pixels = Vec::new();
            visited[r * w + c] = true;
            stack.push((r, c));
            while let Some((pr, pc)) = stack.pop() {
                pixels.push((pr as u32, pc as u32));
                for (dr, dc) in NEIGHBORS {
                    let nr = pr as i32 + dr;
                    let nc = pc as i32 + dc;
                    if nr < 0 || nc < 0 || nr >= h as i32 || nc >= w as i32 {
                        continue;
                    }
                    let (nr, nc) = (nr as usize, nc as usize);
                    if !visited[nr * w + nc] && labels[(nr, nc)] == label {
                        visited[nr * w + nc] = true;
                        stack.push((nr, nc));
                    }
                }
            }
            out.push(Instance::new(label, pixels));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;

    fn mask_from(rows: &[&[u8]], class_count: u16) -> SemanticMask {
        let h = rows.len();
        let w = rows[0].len();
        let labels = Array2::from_shape_fn((h, w), |(r, c)| rows[r][c]);
        SemanticMask::new(labels, class_count).unwrap()
    }

    #[test]
    fn empty_mask_yields_nothing() {
        let mask = SemanticMask::zeros(4, 4, 2).unwrap();
        assert!(extract_instances(&mask).is_empty());
    }

    #[test]
    fn two_disjoint_blocks() {
        let mask = mask_from(
            &[
                &[1, 1, 0, 0, 0, 0, 0, 0],
                &[1, 1, 0, 0, 0, 0, 0, 0],
                &[0, 0, 0, 0, 0, 0, 0, 0],
                &[0, 0, 0, 0, 0, 1, 1, 0],
                &[0, 0, 0, 0, 0, 1, 1, 0],
                &[0, 0, 0, 0, 0, 0, 0, 0],
                &[0, 0, 0, 0, 0, 0, 0, 0],
                &[0, 0, 0, 0, 0, 0, 0, 0],
            ],
            2,
        );
        let instances = extract_instances(&mask);
        assert_eq!(instances.len(), 2);
        assert!(instances.iter().all(|i| i.area == 4));
    }

    #[test]
    fn singleton_pixel_bbox() {
        let mut labels = Array2::zeros((3, 3));
        labels[(0, 0)] = 1u8;
        let mask = SemanticMask::new(labels, 2).unwrap();
        let instances = extract_instances(&mask);
        assert_eq!(instances.len(), 1);
        let inst = &instances[0];
        assert_eq!((inst.bbox.r0, inst.bbox.c0, inst.bbox.r1, inst.bbox.c1), (0, 0, 1, 1));
        assert_eq!(inst.area, 1);
    }

    #[test]
    fn diagonal_touch_is_one_component() {
        let mask = mask_from(&[&[1, 0], &[0, 1]], 2);
        assert_eq!(extract_instances(&mask).len(), 1);
    }

    #[test]
    fn different_labels_do_not_merge() {
        let mask = mask_from(&[&[1, 2], &[2, 1]], 3);
        // label 1 pixels touch diagonally, as do label 2 pixels
        let instances = extract_instances(&mask);
        assert_eq!(instances.len(), 2);
    }

    #[test]
    fn partition_property_on_a_pattern() {
        let mask = mask_from(
            &[
                &[1, 0, 1, 0],
                &[0, 1, 0, 1],
                &[1, 0, 1, 0],
                &[0, 0, 0, 0],
            ],
            2,
        );
        let instances = extract_instances(&mask);
        let total: usize = instances.iter().map(|i| i.area).sum();
        assert_eq!(total, mask.foreground_area());
        // all diagonal-connected: one component
        assert_eq!(instances.len(), 1);
    }
}
