use std::collections::BTreeMap;
use std::sync::{Condvar, Mutex};
use std::time::Duration;

use serde::de::DeserializeOwned;
use serde::Serialize;
use text2seg_core::backend::wire::{self, *};
use text2seg_core::backend::{dedup_instances, Capabilities, GALLERY_DEDUP_IOU};
use text2seg_core::{BBox, Backend, BackendError, Embedding, ImageRaster, InstanceMask, PointPrompt, SimilarityMap};

pub const MAX_IN_FLIGHT: usize = 4;
pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(300);

/// Counting semaphore bounding concurrent requests.
struct Slots {
    free: Mutex<usize>,
    cv: Condvar,
}

struct SlotGuard<'a>(&'a Slots);

impl Slots {
    fn new(n: usize) -> Self {
        Self {
            free: Mutex::new(n),
            cv: Condvar::new(),
        }
    }

    fn acquire(&self) -> SlotGuard<'_> {
        let mut free = self.free.lock().unwrap_or_else(|e| e.into_inner());
        while *free == 0 {
            free = self.cv.wait(free).unwrap_or_else(|e| e.into_inner());
        }
        *free -= 1;
        SlotGuard(self)
    }
}

impl Drop for SlotGuard<'_> {
    fn drop(&mut self) {
        *self.0.free.lock().unwrap_or_else(|e| e.into_inner()) += 1;
        self.0.cv.notify_one();
    }
}

/// A [`Backend`] served over HTTP by a model server.
///
/// At most [`MAX_IN_FLIGHT`] requests are outstanding at once. A request that
/// fails at the transport level is retried once; service errors are not.
pub struct RemoteBackend {
    base: String,
    agent: ureq::Agent,
    slots: Slots,
    info: InfoResponse,
}

impl std::fmt::Debug for RemoteBackend {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RemoteBackend")
            .field("base", &self.base)
            .field("info", &self.info)
            .finish()
    }
}

impl RemoteBackend {
    /// Connects and reads the server's capabilities from `/v1/info`.
    pub fn connect(base_url: &str) -> Result<Self, BackendError> {
        Self::connect_with_timeout(base_url, DEFAULT_TIMEOUT)
    }

    pub fn connect_with_timeout(base_url: &str, timeout: Duration) -> Result<Self, BackendError> {
        let config = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .timeout_global(Some(timeout))
            .build();
        let mut backend = Self {
            base: base_url.trim_end_matches('/').to_string(),
            agent: ureq::Agent::new_with_config(config),
            slots: Slots::new(MAX_IN_FLIGHT),
            info: InfoResponse {
                capabilities: Vec::new(),
                model_ids: BTreeMap::new(),
            },
        };
        backend.info = backend.call(wire::INFO, None::<&()>)?;
        Ok(backend)
    }

    pub fn base_url(&self) -> &str {
        &self.base
    }

    pub fn model_ids(&self) -> &BTreeMap<String, String> {
        &self.info.model_ids
    }

    fn call<Req: Serialize, Resp: DeserializeOwned>(
        &self,
        endpoint: &str,
        body: Option<&Req>,
    ) -> Result<Resp, BackendError> {
        let payload = body
            .map(serde_json::to_vec)
            .transpose()
            .map_err(|e| BackendError::bad_request(format!("{endpoint}: cannot encode request: {e}")))?;
        let _slot = self.slots.acquire();
        let (status, text) = match self.send(endpoint, payload.as_deref()) {
            Err(BackendError::Transport { .. }) => self.send(endpoint, payload.as_deref())?,
            other => other?,
        };
        if status == 200 {
            return serde_json::from_str(&text).map_err(|e| BackendError::Protocol {
                endpoint: endpoint.into(),
                message: format!("malformed response: {e}"),
            });
        }
        match serde_json::from_str::<ErrorBody>(&text) {
            Ok(body) => Err(body.into()),
            Err(_) => Err(BackendError::Protocol {
                endpoint: endpoint.into(),
                message: format!("HTTP {status} without an error body"),
            }),
        }
    }

    fn send(&self, endpoint: &str, payload: Option<&[u8]>) -> Result<(u16, String), BackendError> {
        let url = format!("{}{}", self.base, endpoint);
        let transport = |e: ureq::Error| BackendError::Transport {
            endpoint: endpoint.into(),
            message: e.to_string(),
        };
        let mut resp = match payload {
            Some(bytes) => self
                .agent
                .post(&url)
                .header("content-type", "application/json")
                .send(bytes),
            None => self.agent.get(&url).call(),
        }
        .map_err(transport)?;
        let status = resp.status().as_u16();
        let text = resp
            .body_mut()
            .with_config()
            .limit(u64::MAX)
            .read_to_string()
            .map_err(transport)?;
        Ok((status, text))
    }

    fn check_masks(
        &self,
        endpoint: &str,
        image: &ImageRaster,
        instances: Vec<WireInstance>,
    ) -> Result<Vec<InstanceMask>, BackendError> {
        instances
            .into_iter()
            .map(|i| {
                if i.rle.dims() != image.dims() {
                    return Err(BackendError::Protocol {
                        endpoint: endpoint.into(),
                        message: format!("mask is {:?}, image is {:?}", i.rle.dims(), image.dims()),
                    });
                }
                if !(0.0..=1.0).contains(&i.confidence) {
                    return Err(BackendError::Protocol {
                        endpoint: endpoint.into(),
                        message: format!("confidence {} outside [0, 1]", i.confidence),
                    });
                }
                Ok(i.into())
            })
            .collect()
    }
}

impl Backend for RemoteBackend {
    fn capabilities(&self) -> Capabilities {
        self.info.capabilities.iter().copied().collect()
    }

    fn detect_boxes(
        &self,
        image: &ImageRaster,
        phrases: &[String],
        box_threshold: f64,
        text_threshold: f64,
    ) -> Result<Vec<BBox>, BackendError> {
        let req = DetectRequest {
            image_png_b64: encode_image(image)?,
            phrases: phrases.to_vec(),
            box_threshold,
            text_threshold,
        };
        let resp: DetectResponse = self.call(wire::DETECT, Some(&req))?;
        let (w, h) = image.dims();
        if let Some(b) = resp.boxes.iter().find(|b| !b.is_valid_for(w, h)) {
            return Err(BackendError::Protocol {
                endpoint: wire::DETECT.into(),
                message: format!("box {:?} outside a {w}x{h} image", (b.x0, b.y0, b.x1, b.y1)),
            });
        }
        Ok(resp.boxes)
    }

    fn similarity_map(&self, image: &ImageRaster, phrase: &str) -> Result<SimilarityMap, BackendError> {
        let req = SimilarityRequest {
            image_png_b64: encode_image(image)?,
            phrase: phrase.into(),
        };
        let resp: SimilarityResponse = self.call(wire::SIMILARITY, Some(&req))?;
        let protocol = |message: String| BackendError::Protocol {
            endpoint: wire::SIMILARITY.into(),
            message,
        };
        if (resp.w, resp.h) != image.dims() {
            return Err(protocol(format!(
                "map is {}x{}, image is {:?}",
                resp.w,
                resp.h,
                image.dims()
            )));
        }
        resp.to_map().map_err(protocol)
    }

    fn segment_prompts(
        &self,
        image: &ImageRaster,
        points: &[PointPrompt],
        boxes: &[BBox],
    ) -> Result<Vec<InstanceMask>, BackendError> {
        let req = SegmentRequest {
            image_png_b64: encode_image(image)?,
            points: points.to_vec(),
            boxes: boxes.to_vec(),
        };
        let resp: SegmentResponse = self.call(wire::SEGMENT, Some(&req))?;
        self.check_masks(wire::SEGMENT, image, resp.instances)
    }

    fn segment_auto(&self, image: &ImageRaster, grid_n: u32) -> Result<Vec<InstanceMask>, BackendError> {
        let req = SegmentAutoRequest {
            image_png_b64: encode_image(image)?,
            grid_n,
        };
        let resp: SegmentResponse = self.call(wire::SEGMENT_AUTO, Some(&req))?;
        let gallery = self.check_masks(wire::SEGMENT_AUTO, image, resp.instances)?;
        Ok(dedup_instances(gallery, GALLERY_DEDUP_IOU))
    }

    fn embed_image(&self, image: &ImageRaster) -> Result<Embedding, BackendError> {
        let req = EmbedImageRequest {
            image_png_b64: encode_image(image)?,
        };
        let resp: EmbedImageResponse = self.call(wire::EMBED_IMAGE, Some(&req))?;
        Embedding::normalized(resp.vector)
    }

    fn embed_texts(&self, phrases: &[String]) -> Result<Vec<Embedding>, BackendError> {
        let req = EmbedTextRequest {
            phrases: phrases.to_vec(),
        };
        let resp: EmbedTextResponse = self.call(wire::EMBED_TEXT, Some(&req))?;
        if resp.vectors.len() != phrases.len() {
            return Err(BackendError::Protocol {
                endpoint: wire::EMBED_TEXT.into(),
                message: format!("{} vectors for {} phrases", resp.vectors.len(), phrases.len()),
            });
        }
        resp.vectors.into_iter().map(Embedding::normalized).collect()
    }
}
