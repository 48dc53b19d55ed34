import numpy as np

from app.autodiff import F, Tensor, no_grad
from app.schemas import PooledFeatures, ProjectedKeys
from app.settings import ModelSettings
from app.utils import RngPurpose, ShapeError, derive_rng


__all__ = [
    "Linear", "RowLinear", "BatchNorm", "Projection", "Encoder", "ModelParams",
    "extract_features", "pool_features", "project_keys", "embed",
]


class Linear:
    def __init__(self, name: str, in_features: int, out_features: int, rng: np.random.Generator):
        scale = np.sqrt(2.0 / in_features)
        self.weight = Tensor(
            rng.standard_normal((in_features, out_features)) * scale,
            requires_grad=True, name=f"{name}.weight"
        )
        self.bias = Tensor(np.zeros(out_features), requires_grad=True, name=f"{name}.bias")

    def __call__(self, x: Tensor) -> Tensor:
        return F.add(F.matmul(x, self.weight), self.bias)

    def parameters(self) -> list[Tensor]:
        return [self.weight, self.bias]


class BatchNorm:
    def __init__(self, name: str, features: int, momentum: float, eps: float):
        self.gamma = Tensor(np.ones(features), requires_grad=True, name=f"{name}.gamma")
        self.beta = Tensor(np.zeros(features), requires_grad=True, name=f"{name}.beta")
        self.running_mean = np.zeros(features)
        self.running_var = np.ones(features)
        self.name = name
        self.momentum = momentum
        self.eps = eps

    def __call__(self, x: Tensor, train: bool) -> Tensor:
        return F.batch_norm(
            x, self.gamma, self.beta, self.running_mean, self.running_var,
            train=train, momentum=self.momentum, eps=self.eps
        )

    def parameters(self) -> list[Tensor]:
        return [self.gamma, self.beta]

    def buffers(self) -> dict[str, np.ndarray]:
        return {f"{self.name}.running_mean": self.running_mean, f"{self.name}.running_var": self.running_var}


class Projection:
    """FC -> BN -> L2-Norm into the common key space."""

    def __init__(self, name: str, in_features: int, settings: ModelSettings, rng: np.random.Generator):
        self.fc = Linear(f"{name}.fc", in_features, settings.key_dim, rng)
        self.bn = BatchNorm(f"{name}.bn", settings.key_dim, settings.bn_momentum, settings.bn_eps)

    def __call__(self, x: Tensor, train: bool) -> Tensor:
        return F.l2_normalize(self.bn(self.fc(x), train))

    def parameters(self) -> list[Tensor]:
        return self.fc.parameters() + self.bn.parameters()


class RowLinear:
    """One affine map per feature-map row, selected by each input's row index."""

    def __init__(self, name: str, rows: int, in_features: int, out_features: int, rng: np.random.Generator):
        scale = np.sqrt(2.0 / in_features)
        self.rows = rows
        self.in_features = in_features
        self.weight = Tensor(
            rng.standard_normal((rows * in_features, out_features)) * scale,
            requires_grad=True, name=f"{name}.weight"
        )
        self.bias = Tensor(np.zeros((rows, out_features)), requires_grad=True, name=f"{name}.bias")

    def __call__(self, x: np.ndarray, row_index: np.ndarray) -> Tensor:
        count = x.shape[0]
        expanded = np.zeros((count, self.rows, self.in_features))
        expanded[np.arange(count), row_index] = x
        selector = np.eye(self.rows)[row_index]
        return F.add(
            F.matmul(Tensor(expanded.reshape(count, -1)), self.weight),
            F.matmul(Tensor(selector), self.bias)
        )

    def weight_for_row(self, row: int) -> np.ndarray:
        return self.weight.data[row * self.in_features:(row + 1) * self.in_features]

    def parameters(self) -> list[Tensor]:
        return [self.weight, self.bias]


class Encoder:
    """Patch (h, w) of the image becomes cell (h, w) of the feature map.

    The first stage has separate weights per map row, the second is shared.
    """

    def __init__(self, settings: ModelSettings, image_shape: tuple[int, int, int], rng: np.random.Generator):
        height, width, channels = image_shape
        if height % settings.feature_height or width % settings.feature_width:
            raise ShapeError(
                f"image {height}x{width} does not tile into a "
                f"{settings.feature_height}x{settings.feature_width} feature map"
            )
        self.image_shape = tuple(image_shape)
        self.grid = (settings.feature_height, settings.feature_width)
        self.patch = (height // settings.feature_height, width // settings.feature_width)
        patch_size = self.patch[0] * self.patch[1] * channels
        self.stage1 = RowLinear(
            "encoder.stage1", settings.feature_height, patch_size, settings.hidden_channels, rng
        )
        self.stage2 = Linear("encoder.stage2", settings.hidden_channels, settings.feature_channels, rng)

    def patches(self, images: np.ndarray) -> np.ndarray:
        if images.shape[1:] != self.image_shape:
            raise ShapeError(f"encoder: expected images of shape {self.image_shape}, got {images.shape[1:]}")
        batch = images.shape[0]
        (grid_h, grid_w), (patch_h, patch_w) = self.grid, self.patch
        blocks = images.reshape(batch, grid_h, patch_h, grid_w, patch_w, self.image_shape[2])
        return blocks.transpose(0, 1, 3, 2, 4, 5).reshape(batch * grid_h * grid_w, -1)

    def __call__(self, images: np.ndarray) -> Tensor:
        batch = images.shape[0]
        grid_h, grid_w = self.grid
        row_index = np.tile(np.repeat(np.arange(grid_h), grid_w), batch)
        hidden = F.relu(self.stage1(self.patches(images), row_index))
        cells = F.relu(self.stage2(hidden))
        fmap = F.reshape(cells, (batch, *self.grid, cells.shape[1]))
        return F.transpose(fmap, (0, 3, 1, 2))

    def parameters(self) -> list[Tensor]:
        return self.stage1.parameters() + self.stage2.parameters()


class ModelParams:
    def __init__(self, settings: ModelSettings, image_shape: tuple[int, int, int]):
        rng = derive_rng(settings.init_seed, RngPurpose.PARAMS)
        channels = settings.feature_channels
        self.settings = settings
        self.encoder = Encoder(settings, image_shape, rng)
        self.proj_global = Projection("proj_global", channels, settings, rng)
        if settings.share_projection:
            self.proj_stripe = self.proj_global
        else:
            self.proj_stripe = Projection("proj_stripe", channels, settings, rng)
        self.proj_concat = Projection("proj_concat", settings.n_stripes * channels, settings, rng)

    def _modules(self) -> list:
        modules = [self.encoder, self.proj_global, self.proj_stripe, self.proj_concat]
        unique = []
        for module in modules:
            if all(module is not seen for seen in unique):
                unique.append(module)
        return unique

    def parameters(self) -> dict[str, Tensor]:
        return {tensor.name: tensor for module in self._modules() for tensor in module.parameters()}

    def buffers(self) -> dict[str, np.ndarray]:
        buffers = {}
        for module in self._modules():
            if isinstance(module, Projection):
                buffers.update(module.bn.buffers())
        return buffers

    def state_dict(self) -> dict[str, np.ndarray]:
        state = {name: tensor.data.copy() for name, tensor in self.parameters().items()}
        state.update({name: buffer.copy() for name, buffer in self.buffers().items()})
        return state

    def load_state_dict(self, state: dict[str, np.ndarray]) -> None:
        targets = {name: tensor.data for name, tensor in self.parameters().items()}
        targets.update(self.buffers())
        missing = sorted(set(targets) - set(state))
        if missing:
            raise ShapeError(f"state is missing {', '.join(missing)}")
        for name, target in targets.items():
            if state[name].shape != target.shape:
                raise ShapeError(f"{name}: stored shape {state[name].shape} != model shape {target.shape}")
            np.copyto(target, state[name])


def extract_features(images: np.ndarray, params: ModelParams, train_mode: bool) -> Tensor:
    images = np.asarray(images, dtype=np.float64)
    if train_mode:
        return params.encoder(images)
    with no_grad():
        return params.encoder(images)


def pool_features(fmap: Tensor, n_stripes: int) -> PooledFeatures:
    height = fmap.shape[2]
    if height % n_stripes:
        raise ShapeError(f"pool_features: map height {height} is not divisible by {n_stripes} stripes")
    rows = height // n_stripes
    stripes = [
        F.mean(F.getitem(fmap, (slice(None), slice(None), slice(j * rows, (j + 1) * rows))), axis=(2, 3))
        for j in range(n_stripes)
    ]
    return PooledFeatures(global_features=F.mean(fmap, axis=(2, 3)), stripe_features=stripes)


def project_keys(pooled: PooledFeatures, params: ModelParams, train_mode: bool) -> ProjectedKeys:
    if not train_mode:
        with no_grad():
            return _project(pooled, params, train=False)
    return _project(pooled, params, train=True)


def _project(pooled: PooledFeatures, params: ModelParams, train: bool) -> ProjectedKeys:
    stripes = pooled.stripe_features
    batch = pooled.global_features.shape[0]
    v_global = params.proj_global(pooled.global_features, train)
    stacked = params.proj_stripe(F.concat(stripes, axis=0), train)
    v_stripes = F.transpose(F.reshape(stacked, (len(stripes), batch, -1)), (1, 0, 2))
    v_local = params.proj_concat(F.concat(stripes, axis=1), train)
    return ProjectedKeys(v_global=v_global, v_stripes=v_stripes, v_local=v_local)


def embed(images: np.ndarray, params: ModelParams, train_mode: bool) -> ProjectedKeys:
    fmap = extract_features(images, params, train_mode)
    return project_keys(pool_features(fmap, params.settings.n_stripes), params, train_mode)
