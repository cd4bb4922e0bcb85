"""Re-saves a VGG19-BN checkpoint as a plain zip-format state dict.

The C++ loader reads `torch.save` zip archives of a torchvision `vgg19_bn`
state dict. Legacy (non-zip) .pth files and full pickled models need one pass
through this script first:

    python3 tools/resave_checkpoint.py vgg19_bn-c79401a0.pth vgg19_bn.pth
"""
import argparse

import torch


def main():
    parser = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("source")
    parser.add_argument("dest")
    args = parser.parse_args()

    obj = torch.load(args.source, map_location="cpu", weights_only=False)
    if isinstance(obj, torch.nn.Module):
        obj = obj.state_dict()
    if "state_dict" in obj:
        obj = obj["state_dict"]
    state = {k: v.detach().contiguous() for k, v in obj.items() if k.startswith("features.")}
    if not state:
        raise SystemExit("no 'features.*' tensors found; is this a torchvision vgg19_bn checkpoint?")
    torch.save(state, args.dest)
    print(f"wrote {len(state)} tensors to {args.dest}")


if __name__ == "__main__":
    main()
