//! The prioritization task buffer: which tasks each strategy re-serves,
//! and how many it serves over a run.

use rmaml::envs::{Task, TaskFamily};
use rmaml::ptb::{l_at, LSchedule, PtbEntry, Strategy, TaskBuffer};
use rmaml::rng::Stream;

fn main() -> rmaml::Result<()> {
    let returns = [-3.1, -9.4, -0.7, -5.2, -4.0, -12.5, -2.2, -6.8];
    let mut buffer = TaskBuffer::new();
    buffer.store(
        returns
            .iter()
            .enumerate()
            .map(|(i, &r)| {
                Ok(PtbEntry {
                    task: Task::new(TaskFamily::PointVel, vec![0.25 * i as f64], false)?,
                    val_return: r,
                })
            })
            .collect::<rmaml::Result<_>>()?,
    )?;

    println!("stored validation returns: {returns:?}");
    let mut rng = Stream::root(3).named("buffer").rng();
    for l in [1, 3] {
        for strategy in Strategy::ALL {
            let picked = buffer.select_indices(l, strategy, &mut rng)?;
            let chosen: Vec<f64> = picked
                .iter()
                .map(|&i| buffer.entries()[i].val_return)
                .collect();
            println!("l = {l} {strategy:<8} -> entries {picked:?}, returns {chosen:?}");
        }
    }

    let schedule = LSchedule {
        max_l: 5,
        total_iterations: 300,
    };
    let marks: Vec<String> = [0, 59, 60, 150, 239, 240, 299]
        .iter()
        .map(|&it| format!("{it}:{}", l_at(&schedule, it)))
        .collect();
    println!(
        "\nL schedule (iteration:L) for M = 20 over 300 iterations: {}",
        marks.join(" ")
    );
    Ok(())
}
