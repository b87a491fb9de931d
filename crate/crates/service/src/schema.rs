//! Request parsing with errors that name the offending field.

use base64::Engine;
use morpheus_tensor::Tensor;
use serde_json::{Map, Value};
use stylemorpheus::camera::face_angles_to_camera_pose;
use stylemorpheus::codes::{CodeDims, Group, SemanticCode};
use stylemorpheus::data_io::image_io::{decode_mask, decode_rgb};
use stylemorpheus::CameraPose;

use crate::error::ApiError;

pub fn parse_body(body: &[u8]) -> Result<Map<String, Value>, ApiError> {
    match serde_json::from_slice::<Value>(body) {
        Ok(Value::Object(m)) => Ok(m),
        Ok(_) => Err(ApiError::bad_request("body", "expected a JSON object")),
        Err(e) => Err(ApiError::bad_request("body", format!("invalid JSON: {e}"))),
    }
}

fn number(v: &Value, field: &str) -> Result<f64, ApiError> {
    v.as_f64().filter(|x| x.is_finite()).ok_or_else(|| ApiError::bad_request(field, "expected a finite number"))
}

/// Pose object `{yaw, pitch, roll, t}`; missing angles are 0 and a missing
/// `t` places the camera at `radius` on the canonical axis.
pub fn parse_pose(v: Option<&Value>, radius: f64) -> Result<CameraPose, ApiError> {
    let Some(v) = v else { return Err(ApiError::bad_request("pose", "missing")) };
    let obj = v.as_object().ok_or_else(|| ApiError::bad_request("pose", "expected an object"))?;
    let mut pose = CameraPose::canonical(radius);
    for (k, val) in obj {
        let field = format!("pose.{k}");
        match k.as_str() {
            "yaw" => pose.yaw = number(val, &field)?,
            "pitch" => pose.pitch = number(val, &field)?,
            "roll" => pose.roll = number(val, &field)?,
            "t" => {
                let arr = val.as_array().filter(|a| a.len() == 3);
                let arr = arr.ok_or_else(|| ApiError::bad_request(&field, "expected 3 numbers"))?;
                for (i, x) in arr.iter().enumerate() {
                    pose.t[i] = number(x, &field)?;
                }
            }
            _ => return Err(ApiError::bad_request(field, "unknown pose field")),
        }
    }
    Ok(pose)
}

/// Face angles `{yaw, pitch, roll}` converted to the camera pose that
/// views a canonical head with that orientation.
pub fn parse_face_angles(v: &Value, radius: f64) -> Result<CameraPose, ApiError> {
    let obj = v.as_object().ok_or_else(|| ApiError::bad_request("face_angles", "expected an object"))?;
    let mut a = [0.0; 3];
    for (k, val) in obj {
        let field = format!("face_angles.{k}");
        let i = ["yaw", "pitch", "roll"]
            .iter()
            .position(|n| n == k)
            .ok_or_else(|| ApiError::bad_request(&field, "unknown field"))?;
        a[i] = number(val, &field)?;
    }
    Ok(face_angles_to_camera_pose(a[0], a[1], a[2], radius))
}

pub fn parse_code(v: Option<&Value>, field: &str, dims: &CodeDims) -> Result<SemanticCode, ApiError> {
    let v = v.ok_or_else(|| ApiError::bad_request(field, "missing"))?;
    let code: SemanticCode =
        serde_json::from_value(v.clone()).map_err(|e| ApiError::bad_request(field, e.to_string()))?;
    code.validate(dims).map_err(|e| match e {
        stylemorpheus::Error::Argument { field: f, reason } => {
            ApiError::bad_request(f.replacen("code", field, 1), reason)
        }
        other => ApiError::from(other),
    })?;
    Ok(code)
}

pub fn parse_groups(v: Option<&Value>) -> Result<Vec<Group>, ApiError> {
    let Some(v) = v else { return Ok(Vec::new()) };
    let arr = v.as_array().ok_or_else(|| ApiError::bad_request("groups", "expected an array of group names"))?;
    arr.iter()
        .map(|g| {
            let name = g.as_str().ok_or_else(|| ApiError::bad_request("groups", "group names are strings"))?;
            name.parse::<Group>().map_err(ApiError::from)
        })
        .collect()
}

pub fn parse_usize(v: Option<&Value>, field: &str, default: usize, max: usize) -> Result<usize, ApiError> {
    match v {
        None | Some(Value::Null) => Ok(default),
        Some(v) => v
            .as_u64()
            .map(|x| x as usize)
            .filter(|&x| x <= max)
            .ok_or_else(|| ApiError::bad_request(field, format!("expected an integer in 0..={max}"))),
    }
}

pub fn parse_color(v: Option<&Value>) -> Result<[f64; 3], ApiError> {
    let arr = v.and_then(Value::as_array).filter(|a| a.len() == 3);
    let arr = arr.ok_or_else(|| ApiError::bad_request("color", "expected [r, g, b] in [0, 1]"))?;
    let mut c = [0.0; 3];
    for (i, x) in arr.iter().enumerate() {
        c[i] = number(x, "color")?;
        if !(0.0..=1.0).contains(&c[i]) {
            return Err(ApiError::bad_request("color", "components must be in [0, 1]"));
        }
    }
    Ok(c)
}

fn base64_png(v: Option<&Value>, field: &str) -> Result<Vec<u8>, ApiError> {
    let s = v.and_then(Value::as_str).ok_or_else(|| ApiError::bad_request(field, "expected a base64 PNG string"))?;
    let s = s.strip_prefix("data:image/png;base64,").unwrap_or(s);
    base64::engine::general_purpose::STANDARD
        .decode(s.trim())
        .map_err(|e| ApiError::bad_request(field, format!("invalid base64: {e}")))
}

pub fn parse_image(v: Option<&Value>, field: &str) -> Result<Tensor<f32>, ApiError> {
    decode_rgb(&base64_png(v, field)?).map_err(|e| ApiError::bad_request(field, e.to_string()))
}

pub fn parse_mask(v: Option<&Value>, field: &str) -> Result<Tensor<f32>, ApiError> {
    decode_mask(&base64_png(v, field)?).map_err(|e| ApiError::bad_request(field, e.to_string()))
}

pub fn encode_base64(bytes: &[u8]) -> String {
    base64::engine::general_purpose::STANDARD.encode(bytes)
}
