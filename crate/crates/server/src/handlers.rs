use std::sync::{Arc, PoisonError};

use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::Json;

use streamtgn_core::batcher::compare_sequential_vs_batched;
use streamtgn_core::config::RunConfig;
use streamtgn_core::graph::TemporalEdge;
use streamtgn_core::incremental::IncrementalEngine;
use streamtgn_core::io::{format_edges, generate_stream, parse_edges};
use streamtgn_core::model::ModelParameters;
use streamtgn_core::run::{compare_rebuild_policies, record_change_trace, run_bench, run_sweep, run_verify};
use streamtgn_core::speedup::{format_table, reference_table, theoretical_speedup};
use streamtgn_core::Error;
use streamtgn_proto::*;

use crate::error::{ApiError, ApiResult};
use crate::state::{AppState, Session};

type AppStateRef = State<Arc<AppState>>;

async fn blocking<T, F>(f: F) -> ApiResult<T>
where
    F: FnOnce() -> ApiResult<T> + Send + 'static,
    T: Send + 'static,
{
    tokio::task::spawn_blocking(f).await?
}

fn load_params(config: &mut RunConfig, text: Option<&str>) -> ApiResult<Arc<ModelParameters>> {
    let params = match text {
        Some(text) => {
            let p = ModelParameters::from_text(text)?;
            config.dims = p.dims;
            p
        }
        None => ModelParameters::init(config.seed, config.dims)?,
    };
    config.validate()?;
    Ok(Arc::new(params))
}

struct Prepared {
    config: RunConfig,
    params: Arc<ModelParameters>,
    edges: Vec<TemporalEdge>,
}

/// Parses the stream and loads parameters. Without a parameter file the
/// stream's feature width wins over `config.dims.d_e`.
fn prepare(req: RunRequest) -> ApiResult<Prepared> {
    let RunRequest {
        mut config,
        edges,
        params,
    } = req;
    let (d_e, edges) = parse_edges(&edges, config.sort)?;
    if params.is_none() {
        config.dims.d_e = d_e;
    }
    let params = load_params(&mut config, params.as_deref())?;
    if params.dims.d_e != d_e {
        return Err(Error::Config(format!(
            "edge file has d_e={d_e} but the parameters expect d_e={}",
            params.dims.d_e
        ))
        .into());
    }
    Ok(Prepared { config, params, edges })
}

pub async fn health(State(state): AppStateRef) -> Json<Health> {
    Json(Health {
        status: "ok".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        sessions: state.len(),
    })
}

pub async fn gen(Json(req): Json<GenRequest>) -> ApiResult<Json<GenResponse>> {
    blocking(move || {
        let edges = generate_stream(&req)?;
        Ok(Json(GenResponse {
            edges: edges.len(),
            text: format_edges(&edges, req.d_e),
        }))
    })
    .await
}

pub async fn verify(Json(req): Json<RunRequest>) -> ApiResult<Json<VerifyResponse>> {
    blocking(move || {
        let p = prepare(req)?;
        Ok(Json(run_verify(&p.config, p.params, &p.edges)?))
    })
    .await
}

pub async fn bench(Json(req): Json<BenchRequest>) -> ApiResult<Json<BenchResponse>> {
    blocking(move || {
        let p = prepare(req.run)?;
        let response = match req.sweep {
            None => BenchResponse::Run(run_bench(&p.config, p.params, &p.edges)?),
            Some(sweep) => BenchResponse::Sweep {
                points: run_sweep(&p.config, p.params, &p.edges, sweep.axis, &sweep.values)?,
            },
        };
        Ok(Json(response))
    })
    .await
}

pub async fn staleness(Json(req): Json<StalenessRequest>) -> ApiResult<Json<StalenessResponse>> {
    blocking(move || {
        let p = prepare(req.run)?;
        let report = compare_sequential_vs_batched(&p.edges, &req.batch_sizes, p.params, p.config.engine_config())?;
        Ok(Json(report))
    })
    .await
}

pub async fn policy_compare(Json(req): Json<PolicyRequest>) -> ApiResult<Json<PolicyResponse>> {
    blocking(move || {
        let p = prepare(req.run)?;
        let trace = record_change_trace(&p.config, p.params, &p.edges)?;
        Ok(Json(compare_rebuild_policies(&trace, p.config.drift, req.warmup)?))
    })
    .await
}

pub async fn speedup_table(Json(req): Json<SpeedupRequest>) -> ApiResult<Json<SpeedupResponse>> {
    let mut rows = if req.only_user_rows {
        Vec::new()
    } else {
        reference_table()
    };
    for q in &req.rows {
        rows.push(theoretical_speedup(q.n, q.b, q.l, q.k)?);
    }
    let text = format_table(&rows);
    Ok(Json(SpeedupResponse { rows, text }))
}

pub async fn params_init(Json(req): Json<ParamsInitRequest>) -> ApiResult<Json<ParamsText>> {
    let params = ModelParameters::init(req.seed, req.dims)?;
    Ok(Json(ParamsText { text: params.to_text() }))
}

pub async fn params_dump(Json(req): Json<ParamsText>) -> ApiResult<Json<ParamsSummary>> {
    blocking(move || {
        let params = ModelParameters::from_text(&req.text)?;
        Ok(Json(ParamsSummary {
            dims: params.dims,
            tensors: params.tensor_count(),
            scalars: params.scalar_count(),
            text: params.to_text(),
        }))
    })
    .await
}

pub async fn create_session(
    State(state): AppStateRef,
    Json(req): Json<CreateSession>,
) -> ApiResult<(StatusCode, Json<SessionCreated>)> {
    let created = blocking(move || {
        let mut config = req.config;
        let params = load_params(&mut config, req.params.as_deref())?;
        let engine = IncrementalEngine::new(params, config.engine_config())?;
        let nodes = engine.num_nodes();
        let id = state.insert(Session { config, engine });
        tracing::info!(session = id, "session created");
        Ok(SessionCreated { id, nodes })
    })
    .await?;
    Ok((StatusCode::CREATED, Json(created)))
}

pub async fn delete_session(State(state): AppStateRef, Path(id): Path<u64>) -> ApiResult<StatusCode> {
    state.remove(id)?;
    Ok(StatusCode::NO_CONTENT)
}

fn status_of(id: u64, s: &Session) -> SessionStatus {
    SessionStatus {
        id,
        config: s.config.clone(),
        nodes: s.engine.num_nodes(),
        batches: s.engine.batch_index(),
        queued: s.engine.queue_len(),
        global_drift: s.engine.drift().global_drift(),
        totals: s.engine.totals().clone(),
    }
}

pub async fn session_status(State(state): AppStateRef, Path(id): Path<u64>) -> ApiResult<Json<SessionStatus>> {
    let handle = state.get(id)?;
    let s = handle.lock().unwrap_or_else(PoisonError::into_inner);
    Ok(Json(status_of(id, &s)))
}

pub async fn process_batch(
    State(state): AppStateRef,
    Path(id): Path<u64>,
    Json(req): Json<EdgeList>,
) -> ApiResult<Json<BatchResult>> {
    let handle = state.get(id)?;
    blocking(move || {
        let mut s = handle.lock().unwrap_or_else(PoisonError::into_inner);
        let predictions = s.engine.process_batch(&req.edges)?;
        Ok(Json(BatchResult {
            predictions,
            counters: s.engine.counters().clone(),
            queued: s.engine.queue_len(),
        }))
    })
    .await
}

/// Stages edges in arrival order and stops at the first one the full queue
/// turns away.
pub async fn enqueue(
    State(state): AppStateRef,
    Path(id): Path<u64>,
    Json(req): Json<EdgeList>,
) -> ApiResult<(StatusCode, Json<Enqueued>)> {
    let handle = state.get(id)?;
    let mut s = handle.lock().unwrap_or_else(PoisonError::into_inner);
    let total = req.edges.len();
    let mut accepted = 0;
    for edge in req.edges {
        if !s.engine.enqueue(edge)? {
            break;
        }
        accepted += 1;
    }
    if accepted == 0 && total > 0 {
        return Err(ApiError::QueueFull);
    }
    let status = if accepted < total {
        StatusCode::ACCEPTED
    } else {
        StatusCode::OK
    };
    Ok((
        status,
        Json(Enqueued {
            accepted,
            rejected: total - accepted,
            queued: s.engine.queue_len(),
        }),
    ))
}

/// Processes one batch of up to `batch_size` queued edges.
pub async fn step(State(state): AppStateRef, Path(id): Path<u64>) -> ApiResult<Json<BatchResult>> {
    let handle = state.get(id)?;
    blocking(move || {
        let mut s = handle.lock().unwrap_or_else(PoisonError::into_inner);
        let b = s.config.batch_size;
        let (predictions, counters) = match s.engine.step(b)? {
            Some((_, predictions)) => (predictions, s.engine.counters().clone()),
            None => (Vec::new(), Default::default()),
        };
        Ok(Json(BatchResult {
            predictions,
            counters,
            queued: s.engine.queue_len(),
        }))
    })
    .await
}

pub async fn embedding(State(state): AppStateRef, Path((id, node)): Path<(u64, usize)>) -> ApiResult<Json<Embedding>> {
    let handle = state.get(id)?;
    let s = handle.lock().unwrap_or_else(PoisonError::into_inner);
    let memory = s.engine.memory();
    Ok(Json(Embedding {
        node,
        values: s.engine.embedding(node).to_vec(),
        memory: memory.state(node).to_vec(),
        last_interaction: memory.last_interaction(node),
    }))
}
