"""Computes reference conv_k_1 features with torchvision's own vgg19_bn.

Used by the backbone tests to check the C++ forward pass against the
reference implementation:

    python3 tools/torchvision_reference.py WEIGHTS INPUT OUTPUT

INPUT holds a 1x3xHxW tensor in [0, 1]; OUTPUT receives a dict mapping
"conv1_1".."conv5_1" to the batch-norm outputs (pre-ReLU) of those layers.
"""
import sys

import torch
from torchvision.models import vgg19_bn

# conv index of conv_k_1 in vgg19_bn.features; its batch norm follows at +1
TAPS = {"conv1_1": 0, "conv2_1": 7, "conv3_1": 14, "conv4_1": 27, "conv5_1": 40}


def main():
    weights, src, dest = sys.argv[1:4]
    state = torch.load(weights, map_location="cpu", weights_only=False)
    model = vgg19_bn(weights=None).features.eval()
    model.load_state_dict({k[len("features."):]: v for k, v in state.items()})

    pixels = torch.load(src, weights_only=False).float()
    mean = torch.tensor([0.485, 0.456, 0.406]).view(1, 3, 1, 1)
    std = torch.tensor([0.229, 0.224, 0.225]).view(1, 3, 1, 1)
    x = (pixels - mean) / std

    out = {}
    bn_to_name = {i + 1: name for name, i in TAPS.items()}
    with torch.no_grad():
        for i, layer in enumerate(model):
            x = layer(x)
            if i in bn_to_name:
                out[bn_to_name[i]] = x.clone()
            if i == TAPS["conv5_1"] + 1:
                break
    torch.save(out, dest)


if __name__ == "__main__":
    main()
