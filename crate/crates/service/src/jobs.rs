//! Fit and color-edit jobs, run one at a time on a worker thread that
//! yields to in-flight render requests between optimizer steps.

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::mpsc::{channel, Sender};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use morpheus_tensor::Tensor;
use serde::Serialize;
use serde_json::{json, Value};
use stylemorpheus::applications::{edit_part_color, fit_single_image, ColorEditRequest, FitOptions};
use stylemorpheus::codes::SemanticCode;
use stylemorpheus::data_io::image_io::encode_png_rgb;
use stylemorpheus::{CameraPose, Model};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum JobKind {
    Fit,
    ColorEdit,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum JobState {
    Queued,
    Running,
    Done,
    Failed,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct Progress {
    pub step: usize,
    pub total: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct Job {
    pub id: u64,
    pub kind: JobKind,
    pub state: JobState,
    pub progress: Progress,
    pub result: Option<Value>,
    pub error: Option<String>,
}

pub enum JobSpec {
    Fit { image: Tensor<f32>, mask: Tensor<f32>, pose: CameraPose, steps: usize },
    ColorEdit(ColorEditRequest),
}

struct Entry {
    job: Job,
    code: Option<SemanticCode>,
    image: Option<Vec<u8>>,
}

pub struct JobRegistry {
    entries: Mutex<BTreeMap<u64, Entry>>,
    next: AtomicUsize,
    tx: Mutex<Sender<(u64, JobSpec)>>,
}

impl JobRegistry {
    /// Starts the worker. `renders` counts render requests in flight; the
    /// worker pauses between steps while it is nonzero.
    pub fn start(model: Arc<Model>, renders: Arc<AtomicUsize>) -> Arc<Self> {
        let (tx, rx) = channel::<(u64, JobSpec)>();
        let reg = Arc::new(Self { entries: Mutex::new(BTreeMap::new()), next: AtomicUsize::new(1), tx: Mutex::new(tx) });
        let weak = Arc::downgrade(&reg);
        std::thread::Builder::new()
            .name("jobs".into())
            .spawn(move || {
                while let Ok((id, spec)) = rx.recv() {
                    let Some(reg) = weak.upgrade() else { break };
                    reg.run(&model, &renders, id, spec);
                }
            })
            .expect("spawn job worker");
        reg
    }

    pub fn submit(&self, kind: JobKind, total: usize, spec: JobSpec) -> Job {
        let id = self.next.fetch_add(1, Ordering::SeqCst) as u64;
        let job = Job {
            id,
            kind,
            state: JobState::Queued,
            progress: Progress { step: 0, total },
            result: None,
            error: None,
        };
        self.entries.lock().expect("job registry").insert(id, Entry { job: job.clone(), code: None, image: None });
        if self.tx.lock().expect("job queue").send((id, spec)).is_err() {
            self.finish(id, Err("job worker stopped".into()));
        }
        job
    }

    pub fn get(&self, id: u64) -> Option<Job> {
        self.entries.lock().expect("job registry").get(&id).map(|e| e.job.clone())
    }

    /// Result code of a finished job.
    pub fn code(&self, id: u64) -> Option<SemanticCode> {
        self.entries.lock().expect("job registry").get(&id).and_then(|e| e.code.clone())
    }

    pub fn image(&self, id: u64) -> Option<Vec<u8>> {
        self.entries.lock().expect("job registry").get(&id).and_then(|e| e.image.clone())
    }

    fn update(&self, id: u64, f: impl FnOnce(&mut Entry)) {
        if let Some(e) = self.entries.lock().expect("job registry").get_mut(&id) {
            f(e);
        }
    }

    fn finish(&self, id: u64, outcome: Result<(Value, SemanticCode, Vec<u8>), String>) {
        self.update(id, |e| match outcome {
            Ok((result, code, image)) => {
                e.job.state = JobState::Done;
                e.job.progress.step = e.job.progress.total;
                e.job.result = Some(result);
                e.code = Some(code);
                e.image = Some(image);
            }
            Err(msg) => {
                e.job.state = JobState::Failed;
                e.job.error = Some(msg);
            }
        });
    }

    fn run(&self, model: &Model, renders: &AtomicUsize, id: u64, spec: JobSpec) {
        self.update(id, |e| e.job.state = JobState::Running);
        let progress = |step: usize, _loss: f64| {
            self.update(id, |e| e.job.progress.step = e.job.progress.step.max(step));
            while renders.load(Ordering::SeqCst) > 0 {
                std::thread::sleep(Duration::from_millis(2));
            }
        };
        let image_ref = format!("/jobs/{id}/image");
        let outcome = match spec {
            JobSpec::Fit { image, mask, pose, steps } => {
                let opts = FitOptions { steps, ..FitOptions::for_model(model) };
                fit_single_image(model, &image, &mask, &pose, &opts, progress).and_then(|fit| {
                    let png = encode_png_rgb(&model.render(&fit.code, &fit.pose)?.rgb);
                    let mut result = serde_json::to_value(&fit)?;
                    result["image"] = json!(image_ref);
                    Ok((result, fit.code, png))
                })
            }
            JobSpec::ColorEdit(req) => edit_part_color(model, &req, progress).and_then(|edit| {
                let png = encode_png_rgb(&edit.image);
                let mut result = serde_json::to_value(&edit)?;
                result["image"] = json!(image_ref);
                Ok((result, edit.code, png))
            }),
        };
        if let Err(e) = &outcome {
            log::warn!("job {id} failed: {e}");
        }
        self.finish(id, outcome.map_err(|e| e.to_string()));
    }
}
