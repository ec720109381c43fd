use std::fmt::Write;

use super::geometry::{Obstacle, Point, Rect};
use super::{ScenarioKind, ScenarioSpec, TRACKING_TOLERANCE};
use crate::dynamics::{position, DynamicsModel, ModelKind};

fn vec3(v: impl IntoIterator<Item = f64>) -> String {
    let parts: Vec<String> = v.into_iter().map(|x| format!("{x:.3}")).collect();
    format!("({})", parts.join(", "))
}

fn pt(p: Point) -> String {
    vec3(p)
}

fn rect(r: &Rect) -> String {
    format!(
        "[{:.3}, {:.3}] x [{:.3}, {:.3}]",
        r.min[0], r.max[0], r.min[1], r.max[1]
    )
}

fn model_sentence(model: &DynamicsModel) -> String {
    let b = &model.control_bounds;
    match model.kind {
        ModelKind::SingleIntegrator2D => format!(
            "a planar single integrator with state (x, y) in m and velocity control (vx, vy) limited to [{:.3}, {:.3}] m/s per axis",
            b[0].lo, b[0].hi
        ),
        ModelKind::DoubleIntegrator2D => format!(
            "a planar double integrator with state (x, y, vx, vy) and acceleration control (ax, ay) limited to [{:.3}, {:.3}] m/s^2 per axis",
            b[0].lo, b[0].hi
        ),
        ModelKind::Unicycle => format!(
            "a unicycle (Dubins-type car) with state (x, y, theta) and controls speed v in [{:.3}, {:.3}] m/s and turn rate omega in [{:.3}, {:.3}] rad/s",
            b[0].lo, b[0].hi, b[1].lo, b[1].hi
        ),
        ModelKind::Pendulum => format!(
            "a torque-driven pendulum with state (angle, angular rate), g = {:.3}, l = {:.3}, mass = {:.3} and torque limited to [{:.3}, {:.3}] N m",
            model.params["g"], model.params["l"], model.params["mass"], b[0].lo, b[0].hi
        ),
    }
}

fn obstacle_phrase(o: &Obstacle) -> String {
    match o {
        Obstacle::Circle { center, radius } => {
            format!("circle centred at {} with radius {radius:.3}", pt(*center))
        }
        Obstacle::Rect { min, max } => format!("rectangle {}", rect(&Rect::new(*min, *max))),
    }
}

fn obstacle_list(out: &mut String, obstacles: &[Obstacle]) {
    if obstacles.is_empty() {
        out.push_str("There are no obstacles. ");
        return;
    }
    let _ = write!(out, "There are {} obstacles to avoid: ", obstacles.len());
    let items: Vec<String> = obstacles.iter().map(obstacle_phrase).collect();
    out.push_str(&items.join("; "));
    out.push_str(". ");
}

/// Plain-English task statement for the scenario.
pub fn render_task_description(spec: &ScenarioSpec) -> String {
    let mut out = String::new();
    let _ = write!(
        out,
        "The robot is {}. The workspace is {} and the robot must stay inside it. ",
        model_sentence(&spec.model),
        rect(&spec.workspace)
    );
    let _ = write!(
        out,
        "The initial state is x0 = {}. The time step is dt = {:.3} s and the horizon is {} steps ({:.3} s). ",
        vec3(spec.x0.iter().copied()),
        spec.dt,
        spec.horizon,
        spec.dt * spec.horizon as f64
    );
    match spec.kind {
        ScenarioKind::TrackLinear | ScenarioKind::TrackDubins => {
            if let Some(r) = &spec.reference {
                let first = r.position(0);
                let last = r.position(r.len() - 1);
                let _ = write!(
                    out,
                    "Objective: follow the given reference trajectory of {} samples, which starts at {} and ends at {}. ",
                    r.len(),
                    pt(first),
                    pt(last)
                );
            }
            obstacle_list(&mut out, &spec.obstacles);
            let _ = write!(
                out,
                "Success requires a root-mean-square position error of at most {TRACKING_TOLERANCE:.3} m over the horizon."
            );
        }
        ScenarioKind::SimplePlan | ScenarioKind::MazePlan => {
            if let Some(m) = &spec.maze {
                let _ = write!(
                    out,
                    "The workspace is a {}x{} maze of {:.3} m cells with thin walls; the robot starts in cell {} and the goal lies in cell {}. ",
                    m.rows, m.cols, m.cell, m.start_cell, m.goal_cell
                );
            }
            obstacle_list(&mut out, &spec.obstacles);
            if let Some(g) = spec.goal {
                let _ = write!(
                    out,
                    "Objective: drive from the start {} to the goal disc centred at {} with radius {:.3} without collisions, ending inside the goal disc at the final step.",
                    pt(spec.start_position()),
                    pt(g.center),
                    g.radius
                );
            }
        }
        ScenarioKind::StlTask => {
            let region = |n: &str| spec.region(n).map(rect).unwrap_or_default();
            let _ = write!(
                out,
                "Objective: first pick up the key in region {}, then pass through the door {} into the locked room {}, which must not be entered before the key has been visited, and finally reach the goal {}. All of this must happen within {} steps. ",
                region("key"),
                region("door"),
                region("room"),
                region("goal"),
                spec.horizon
            );
            if let Some(f) = &spec.stl_formula {
                let _ = write!(
                    out,
                    "As a signal temporal logic formula over positions: {f}"
                );
            }
        }
    }
    out
}

/// Compact environment and dynamics summary carrying a machine-readable
/// scenario marker.
pub fn environment_summary(spec: &ScenarioSpec) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "[scenario-kind: {}]", spec.kind);
    let _ = writeln!(out, "scenario: {}", spec.id());
    let _ = writeln!(
        out,
        "dynamics: {} (state dim {}, control dim {}, linear: {})",
        spec.model.kind,
        spec.model.state_dim(),
        spec.model.control_dim(),
        spec.model.kind.is_linear()
    );
    let bounds: Vec<String> = spec
        .model
        .control_bounds
        .iter()
        .map(|b| format!("[{:.3}, {:.3}]", b.lo, b.hi))
        .collect();
    let _ = writeln!(out, "control bounds: {}", bounds.join(", "));
    let _ = writeln!(out, "workspace: {}", rect(&spec.workspace));
    let _ = writeln!(out, "dt: {:.3}, horizon: {}", spec.dt, spec.horizon);
    let _ = writeln!(out, "start position: {}", pt(position(&spec.x0)));
    let mut available = vec!["x0", "model", "horizon", "dt", "workspace"];
    if spec.goal.is_some() && spec.kind.is_planning() {
        available.push("goal");
    }
    if !spec.obstacles.is_empty() || spec.kind.is_planning() {
        available.push("obstacles");
    }
    if spec.reference.is_some() {
        available.push("reference");
    }
    if spec.stl_formula.is_some() {
        available.push("stl_formula");
    }
    let _ = writeln!(out, "obstacles: {}", spec.obstacles.len());
    let _ = write!(out, "scenario fields: {}", available.join(", "));
    out
}
