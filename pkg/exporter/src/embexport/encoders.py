"""Encoder adapters for the text, image, and multimodal channels.

Two families per modality:

* Offline deterministic featurizers (``hash`` text, ``pixel`` image) that need
  nothing beyond numpy/Pillow — the default in air-gapped environments and
  the backbone of the test suite.
* Published-encoder adapters (``transformers:<name-or-path>`` text,
  ``torchvision:<arch>[:state-dict]`` image) that pool a frozen pretrained
  model's features. Heavy imports happen lazily so the offline path never
  touches torch.

Every encoder exposes ``width`` (native feature size) and ``encode(items) ->
(n, width) float array``; channel writers compose them with a frozen
projection to the engine dim. The multimodal channel concatenates the text
and image features before projecting.
"""

import numpy as np
from PIL import Image

from .formats import ConfigurationError, ExportError

_U64 = 1 << 64
_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3


def _fnv1a64(data: bytes) -> int:
    h = _FNV_OFFSET
    for byte in data:
        h = ((h ^ byte) * _FNV_PRIME) % _U64
    return h


class HashTextEncoder:
    """Deterministic token-hash featurizer; identical output on any platform."""

    def __init__(self, width: int = 64):
        self.width = width

    def encode(self, texts: list[str]) -> np.ndarray:
        out = np.zeros((len(texts), self.width), dtype=np.float64)
        for i, text in enumerate(texts):
            tokens = text.split()
            if not tokens:
                continue
            acc = np.zeros(self.width, dtype=np.float64)
            for tok in tokens:
                prefix = tok.casefold().encode("utf-8") + b"|"
                for j in range(self.width):
                    acc[j] += 2.0 * (_fnv1a64(prefix + str(j).encode()) / _U64) - 1.0
            out[i] = acc / len(tokens)
        return out


class PixelStatImageEncoder:
    """Downsampled grayscale plus RGB histogram features; no model weights."""

    SIDE = 12
    BINS = 8

    def __init__(self):
        self.width = self.SIDE * self.SIDE + 3 * self.BINS

    def encode(self, paths: list[str]) -> np.ndarray:
        out = np.zeros((len(paths), self.width), dtype=np.float64)
        for i, path in enumerate(paths):
            try:
                with Image.open(path) as img:
                    rgb = img.convert("RGB")
                    gray = np.asarray(
                        rgb.convert("L").resize((self.SIDE, self.SIDE)),
                        dtype=np.float64) / 255.0
                    pixels = np.asarray(rgb, dtype=np.float64) / 255.0
            except Exception as exc:
                raise ExportError(f"cannot decode image {path!r}: {exc}") from exc
            hists = [np.histogram(pixels[..., c], bins=self.BINS,
                                  range=(0.0, 1.0), density=False)[0]
                     for c in range(3)]
            hist = np.concatenate(hists).astype(np.float64)
            hist /= max(hist.sum(), 1.0)
            out[i] = np.concatenate([gray.reshape(-1) - gray.mean(), hist])
        return out


class TransformersTextEncoder:
    """Frozen encoder from the transformers hub or a local directory.

    Uses the pooled output at the first (CLS) position of the last layer.
    """

    def __init__(self, model_name_or_path: str, max_tokens: int = 512):
        try:
            import torch
            from transformers import AutoModel, AutoTokenizer
        except ImportError as exc:
            raise ConfigurationError(
                "transformers text encoder requires torch and transformers") from exc
        self._torch = torch
        try:
            self.tokenizer = AutoTokenizer.from_pretrained(model_name_or_path)
            self.model = AutoModel.from_pretrained(model_name_or_path)
        except Exception as exc:
            raise ConfigurationError(
                f"cannot load text encoder {model_name_or_path!r}: {exc}") from exc
        self.model.eval()
        self.max_tokens = max_tokens
        self.width = int(self.model.config.hidden_size)

    def encode(self, texts: list[str]) -> np.ndarray:
        enc = self.tokenizer([t if t else "[PAD]" for t in texts],
                             return_tensors="pt", padding=True, truncation=True,
                             max_length=self.max_tokens)
        with self._torch.no_grad():
            hidden = self.model(**enc).last_hidden_state
        return hidden[:, 0, :].double().cpu().numpy()


class TorchvisionImageEncoder:
    """Frozen torchvision backbone, classifier head removed, pooled features.

    ``weights_path`` loads a local state dict; without it the named pretrained
    weights are fetched through torchvision (needs network access).
    """

    def __init__(self, arch: str = "resnet18", weights_path: str | None = None):
        try:
            import torch
            import torchvision.models as tvm
            from torchvision import transforms
        except ImportError as exc:
            raise ConfigurationError(
                "torchvision image encoder requires torch and torchvision") from exc
        self._torch = torch
        if not hasattr(tvm, arch):
            raise ConfigurationError(f"unknown torchvision architecture {arch!r}")
        if weights_path:
            model = getattr(tvm, arch)(weights=None)
            state = torch.load(weights_path, map_location="cpu", weights_only=True)
            model.load_state_dict(state)
        else:
            try:
                model = getattr(tvm, arch)(weights="DEFAULT")
            except Exception as exc:
                raise ConfigurationError(
                    f"cannot fetch pretrained weights for {arch!r}: {exc}") from exc
        if hasattr(model, "fc"):
            self.width = int(model.fc.in_features)
            model.fc = torch.nn.Identity()
        elif hasattr(model, "classifier"):
            head = model.classifier[-1] if isinstance(
                model.classifier, torch.nn.Sequential) else model.classifier
            self.width = int(head.in_features)
            model.classifier = torch.nn.Identity()
        else:
            raise ConfigurationError(f"unsupported head layout for {arch!r}")
        model.eval()
        self.model = model
        self.transform = transforms.Compose([
            transforms.Resize((224, 224)),
            transforms.ToTensor(),
            transforms.Normalize(mean=[0.485, 0.456, 0.406],
                                 std=[0.229, 0.224, 0.225]),
        ])

    def encode(self, paths: list[str]) -> np.ndarray:
        tensors = []
        for path in paths:
            try:
                with Image.open(path) as img:
                    tensors.append(self.transform(img.convert("RGB")))
            except Exception as exc:
                raise ExportError(f"cannot decode image {path!r}: {exc}") from exc
        batch = self._torch.stack(tensors)
        with self._torch.no_grad():
            feats = self.model(batch)
        return feats.double().cpu().numpy()


def build_text_encoder(spec: str):
    """``hash[:width]`` or ``transformers:<model-or-path>``."""
    kind, _, arg = spec.partition(":")
    if kind == "hash":
        return HashTextEncoder(width=int(arg) if arg else 64)
    if kind == "transformers":
        if not arg:
            raise ConfigurationError("transformers encoder needs a model name or path")
        return TransformersTextEncoder(arg)
    raise ConfigurationError(f"unknown text encoder {spec!r}")


def build_image_encoder(spec: str):
    """``pixel`` or ``torchvision:<arch>[:<state-dict-path>]``."""
    kind, _, arg = spec.partition(":")
    if kind == "pixel":
        return PixelStatImageEncoder()
    if kind == "torchvision":
        arch, _, weights = arg.partition(":")
        if not arch:
            raise ConfigurationError("torchvision encoder needs an architecture")
        return TorchvisionImageEncoder(arch, weights_path=weights or None)
    raise ConfigurationError(f"unknown image encoder {spec!r}")
