import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from nifti_writer import write_nifti  # noqa: E402
from phantom import build_phantom  # noqa: E402


@pytest.fixture(scope="session")
def phantom_volumes():
    return build_phantom(64)


@pytest.fixture()
def phantom_files(tmp_path, phantom_volumes):
    ct, mask = phantom_volumes
    ct_path = write_nifti(tmp_path / "ct.nii.gz", ct, gzipped=True)
    mask_path = write_nifti(tmp_path / "mask.nii.gz", mask, gzipped=True)
    return ct_path, mask_path


@pytest.fixture()
def rng():
    return np.random.default_rng(20260823)
