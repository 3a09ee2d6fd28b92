use std::convert::Infallible;
use std::io::Write;

use axum::extract::rejection::{JsonRejection, QueryRejection};
use axum::extract::{DefaultBodyLimit, FromRequest, Multipart, Path, Query, Request, State};
use axum::http::{header, StatusCode};
use axum::response::sse::{Event, KeepAlive, Sse};
use axum::response::{IntoResponse, Redirect, Response};
use axum::routing::{delete, get, patch, post};
use axum::{Json, Router};
use futures::Stream;
use serde::Deserialize;
use serde_json::json;
use tokio::sync::broadcast::error::RecvError;

use scenecraft_core::code::Bundle;
use scenecraft_core::project::AssetUpload;
use scenecraft_core::prompt::expand_proxies;
use scenecraft_core::scene::{ElementId, ElementKind, Point, ProxyKind, Transform, CANVAS_HEIGHT, CANVAS_WIDTH};
use scenecraft_core::Error;

use crate::error::ApiError;
use crate::AppState;

const MAX_UPLOAD: usize = 32 * 1024 * 1024;

type ApiResult<T> = Result<T, ApiError>;

pub(crate) fn build(state: AppState) -> Router {
    Router::new()
        .route("/scene", get(scene))
        .route("/elements", post(create_element))
        .route("/elements/{id}", delete(delete_element))
        .route("/elements/{id}/transform", patch(set_transform))
        .route("/proxies", post(add_proxy))
        .route("/proxies/{label}", delete(delete_proxy))
        .route("/modules/{id}/prompt", post(prompt))
        .route("/modules/{id}/session", get(session))
        .route("/context", get(context))
        .route("/sliders/{element}", get(sliders))
        .route("/sliders", patch(set_slider))
        .route("/bundle", get(bundle))
        .route("/preview", get(|| async { Redirect::permanent("/preview/") }))
        .route("/preview/", get(preview_index))
        .route("/preview/{*path}", get(preview))
        .route("/events", get(events))
        .fallback(|| async { ApiError::new(StatusCode::NOT_FOUND, "not-found", "no such endpoint") })
        .method_not_allowed_fallback(|| async {
            ApiError::new(StatusCode::METHOD_NOT_ALLOWED, "method-not-allowed", "method not allowed here")
        })
        .layer(DefaultBodyLimit::max(MAX_UPLOAD))
        .with_state(state)
}

fn body<T>(r: Result<Json<T>, JsonRejection>) -> ApiResult<T> {
    r.map(|Json(v)| v).map_err(|e| ApiError::bad_request(e.body_text()))
}

/// Runs engine work off the async executor; saving touches the disk.
async fn blocking<T: Send + 'static>(f: impl FnOnce() -> Result<T, Error> + Send + 'static) -> ApiResult<T> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::internal(e.to_string()))?
        .map_err(ApiError::from)
}

async fn scene(State(s): State<AppState>) -> Json<serde_json::Value> {
    Json(s.engine.read(|p| {
        json!({
            "name": p.name(),
            "framework": p.framework(),
            "canvas": {"width": CANVAS_WIDTH, "height": CANVAS_HEIGHT},
            "elements": p.scene().elements().collect::<Vec<_>>(),
            "proxies": p.scene().proxies(),
        })
    }))
}

#[derive(Debug, Deserialize)]
struct NewElement {
    name: String,
    kind: ElementKind,
    #[serde(default)]
    members: Vec<ElementId>,
}

async fn read_multipart(mut form: Multipart) -> ApiResult<(NewElement, Option<AssetUpload>)> {
    let (mut name, mut kind, mut members, mut upload) = (None, None, Vec::new(), None);
    while let Some(field) = form.next_field().await.map_err(|e| ApiError::bad_request(e.body_text()))? {
        let field_name = field.name().unwrap_or_default().to_string();
        match field_name.as_str() {
            "asset" => {
                let file_name = field.file_name().unwrap_or("asset").to_string();
                let media_type = field.content_type().unwrap_or("application/octet-stream").to_string();
                let bytes = field.bytes().await.map_err(|e| ApiError::bad_request(e.body_text()))?;
                upload = Some(AssetUpload {
                    file_name,
                    media_type,
                    bytes: bytes.to_vec(),
                });
            }
            "name" | "kind" | "members" => {
                let text = field.text().await.map_err(|e| ApiError::bad_request(e.body_text()))?;
                match field_name.as_str() {
                    "name" => name = Some(text),
                    "kind" => kind = Some(text),
                    _ => members.extend(text.split(',').map(str::trim).filter(|m| !m.is_empty()).map(ElementId::new)),
                }
            }
            other => return Err(ApiError::bad_request(format!("unexpected form field `{other}`"))),
        }
    }
    let name = name.ok_or_else(|| ApiError::bad_request("missing form field `name`"))?;
    let kind = kind.ok_or_else(|| ApiError::bad_request("missing form field `kind`"))?;
    let kind: ElementKind = serde_json::from_value(json!(kind))
        .map_err(|_| ApiError::bad_request(format!("unknown element kind `{kind}`")))?;
    Ok((NewElement { name, kind, members }, upload))
}

/// Accepts multipart (fields `name`, `kind`, optional `members` and file
/// `asset`) or a JSON body without an asset.
async fn create_element(State(s): State<AppState>, req: Request) -> ApiResult<Response> {
    let is_multipart = req
        .headers()
        .get(header::CONTENT_TYPE)
        .and_then(|v| v.to_str().ok())
        .is_some_and(|v| v.starts_with("multipart/form-data"));
    let (spec, upload) = if is_multipart {
        let form = Multipart::from_request(req, &s)
            .await
            .map_err(|e| ApiError::bad_request(e.body_text()))?;
        read_multipart(form).await?
    } else {
        (body(Json::<NewElement>::from_request(req, &s).await)?, None)
    };
    let engine = s.engine.clone();
    let element = blocking(move || {
        let now = engine.now_ms();
        engine.mutate(|p| {
            let el = p.create_element(&spec.name, spec.kind, upload, now)?;
            if !spec.members.is_empty() {
                p.set_group_members(&el.id, spec.members)?;
                return Ok(p.scene().element(&el.id)?.clone());
            }
            Ok(el)
        })
    })
    .await?;
    Ok((StatusCode::CREATED, Json(element)).into_response())
}

async fn delete_element(State(s): State<AppState>, Path(id): Path<String>) -> ApiResult<Response> {
    let engine = s.engine.clone();
    let el = blocking(move || {
        engine.mutate(|p| {
            let id = p.resolve_element(&id)?.id.clone();
            p.delete_element(&id)
        })
    })
    .await?;
    Ok(Json(el).into_response())
}

#[derive(Debug, Deserialize)]
struct TransformPatch {
    x: Option<f64>,
    y: Option<f64>,
    rotation: Option<f64>,
    scale: Option<f64>,
}

async fn set_transform(
    State(s): State<AppState>,
    Path(id): Path<String>,
    patch: Result<Json<TransformPatch>, JsonRejection>,
) -> ApiResult<Response> {
    let patch = body(patch)?;
    let engine = s.engine.clone();
    let el = blocking(move || {
        engine.mutate(|p| {
            let el = p.resolve_element(&id)?;
            let cur = el.transform;
            let id = el.id.clone();
            let t = Transform {
                x: patch.x.unwrap_or(cur.x),
                y: patch.y.unwrap_or(cur.y),
                rotation: patch.rotation.unwrap_or(cur.rotation),
                scale: patch.scale.unwrap_or(cur.scale),
            };
            p.set_transform(&id, t)
        })
    })
    .await?;
    Ok(Json(el).into_response())
}

#[derive(Debug, Deserialize)]
struct NewProxy {
    kind: ProxyKind,
    points: Vec<Point>,
}

async fn add_proxy(State(s): State<AppState>, req: Result<Json<NewProxy>, JsonRejection>) -> ApiResult<Response> {
    let req = body(req)?;
    let engine = s.engine.clone();
    let proxy = blocking(move || engine.mutate(|p| p.add_proxy(req.kind, req.points))).await?;
    Ok((StatusCode::CREATED, Json(proxy)).into_response())
}

async fn delete_proxy(State(s): State<AppState>, Path(label): Path<String>) -> ApiResult<Response> {
    let engine = s.engine.clone();
    let proxy = blocking(move || engine.mutate(|p| p.delete_proxy(&label))).await?;
    Ok(Json(proxy).into_response())
}

#[derive(Debug, Deserialize)]
struct PromptBody {
    text: String,
}

#[derive(Debug, Deserialize)]
struct PromptQuery {
    #[serde(default)]
    wait: bool,
}

/// Answers 202 and generates in the background; progress arrives on the
/// event stream. `?wait=true` answers with the report instead.
async fn prompt(
    State(s): State<AppState>,
    Path(id): Path<String>,
    query: Result<Query<PromptQuery>, QueryRejection>,
    req: Result<Json<PromptBody>, JsonRejection>,
) -> ApiResult<Response> {
    let wait = query.map_err(|e| ApiError::bad_request(e.body_text()))?.wait;
    let text = body(req)?.text;
    let engine = s.engine.clone();
    let module = engine.read(|p| p.resolve_module(&id))?;
    // reject what would fail before reaching the backend
    engine.read(|p| {
        if module.is_central() && p.framework().is_none() {
            expand_proxies(&text, p.scene().proxies()).map(drop)
        } else {
            p.plan_generation(&module, &text, &engine.config().generation).map(drop)
        }
    })?;
    if wait {
        let m = module.clone();
        let report = blocking(move || engine.generate(&m, &text)).await?;
        return Ok(Json(report).into_response());
    }
    let m = module.clone();
    tokio::task::spawn_blocking(move || {
        if let Err(e) = engine.generate(&m, &text) {
            tracing::warn!(module = %m, code = e.code(), "generation failed: {e}");
        }
    });
    Ok((StatusCode::ACCEPTED, Json(json!({"module": module, "status": "accepted"}))).into_response())
}

async fn session(State(s): State<AppState>, Path(id): Path<String>) -> ApiResult<Response> {
    let session = s.engine.read(|p| {
        let m = p.resolve_module(&id)?;
        p.session(&m).cloned()
    })?;
    Ok(Json(session).into_response())
}

async fn context(State(s): State<AppState>) -> Json<serde_json::Value> {
    Json(s.engine.read(|p| {
        json!({
            "compiled": p.context().compile(),
            "summaries": p.context().summaries().collect::<Vec<_>>(),
        })
    }))
}

async fn sliders(State(s): State<AppState>, Path(element): Path<String>) -> ApiResult<Response> {
    let manifest = s.engine.read(|p| {
        let id = p.resolve_element(&element)?.id.clone();
        p.slider_manifest(&id)
    })?;
    Ok(Json(manifest).into_response())
}

#[derive(Debug, Deserialize)]
struct SliderPatch {
    element: String,
    variable: String,
    value: f64,
}

async fn set_slider(State(s): State<AppState>, req: Result<Json<SliderPatch>, JsonRejection>) -> ApiResult<Response> {
    let req = body(req)?;
    let engine = s.engine.clone();
    let outcome = blocking(move || {
        engine.mutate(|p| {
            let id = p.resolve_element(&req.element)?.id.clone();
            p.apply_slider(&id, &req.variable, req.value)
        })
    })
    .await?;
    Ok(Json(outcome).into_response())
}

/// Zip archive of a bundle. Entries are stored in path order with a fixed
/// timestamp so equal bundles give equal archives.
pub fn zip_bundle(bundle: &Bundle) -> std::io::Result<Vec<u8>> {
    let mut w = zip::ZipWriter::new(std::io::Cursor::new(Vec::new()));
    let opts = zip::write::SimpleFileOptions::default()
        .compression_method(zip::CompressionMethod::Deflated)
        .last_modified_time(zip::DateTime::default())
        .unix_permissions(0o644);
    for (path, bytes) in &bundle.files {
        w.start_file(path.as_str(), opts).map_err(std::io::Error::other)?;
        w.write_all(bytes)?;
    }
    Ok(w.finish().map_err(std::io::Error::other)?.into_inner())
}

async fn bundle(State(s): State<AppState>) -> ApiResult<Response> {
    let engine = s.engine.clone();
    let bytes = blocking(move || {
        let bundle = engine.read(|p| p.export_bundle())?;
        zip_bundle(&bundle).map_err(|e| Error::Io {
            path: "bundle.zip".into(),
            source: e,
        })
    })
    .await?;
    Ok((
        [
            (header::CONTENT_TYPE, "application/zip"),
            (header::CONTENT_DISPOSITION, "attachment; filename=\"bundle.zip\""),
        ],
        bytes,
    )
        .into_response())
}

fn media_type(path: &str) -> &'static str {
    match path.rsplit('.').next().unwrap_or_default() {
        "html" => "text/html; charset=utf-8",
        "js" => "text/javascript; charset=utf-8",
        "png" => "image/png",
        "jpg" | "jpeg" => "image/jpeg",
        "gif" => "image/gif",
        "svg" => "image/svg+xml",
        "webp" => "image/webp",
        "md" | "txt" => "text/plain; charset=utf-8",
        _ => "application/octet-stream",
    }
}

async fn preview_index(state: State<AppState>) -> ApiResult<Response> {
    preview(state, Path("index.html".to_string())).await
}

/// Serves files of a fresh export, for loading into an iframe.
async fn preview(State(s): State<AppState>, Path(path): Path<String>) -> ApiResult<Response> {
    let bundle = s.engine.read(|p| p.export_bundle())?;
    let path = if path.is_empty() { "index.html".to_string() } else { path };
    let bytes = bundle
        .get(&path)
        .ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, "not-found", format!("no file `{path}` in the bundle")))?
        .to_vec();
    Ok((
        [
            (header::CONTENT_TYPE, media_type(&path)),
            (header::CACHE_CONTROL, "no-store"),
        ],
        bytes,
    )
        .into_response())
}

/// One SSE message per engine event: `id` is the commit sequence number,
/// `event` the kind and `data` the JSON record.
async fn events(State(s): State<AppState>) -> Sse<impl Stream<Item = Result<Event, Infallible>>> {
    let rx = s.events.subscribe();
    let stream = futures::stream::unfold(rx, |mut rx| async move {
        loop {
            match rx.recv().await {
                Ok(record) => {
                    let event = Event::default()
                        .id(record.seq.to_string())
                        .event(record.event.kind())
                        .json_data(&record)
                        .expect("event records serialize");
                    return Some((Ok(event), rx));
                }
                Err(RecvError::Lagged(n)) => tracing::warn!("event stream dropped {n} events"),
                Err(RecvError::Closed) => return None,
            }
        }
    });
    Sse::new(stream).keep_alive(KeepAlive::default())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zip_is_deterministic() {
        let mut b = Bundle::default();
        b.files.insert("index.html".into(), b"<html></html>".to_vec());
        b.files.insert("code/a.js".into(), vec![b'x'; 4096]);
        let z1 = zip_bundle(&b).unwrap();
        assert_eq!(z1, zip_bundle(&b).unwrap());
        let mut archive = zip::ZipArchive::new(std::io::Cursor::new(z1)).unwrap();
        assert_eq!(archive.len(), 2);
        let mut s = String::new();
        std::io::Read::read_to_string(&mut archive.by_name("index.html").unwrap(), &mut s).unwrap();
        assert_eq!(s, "<html></html>");
    }
}
