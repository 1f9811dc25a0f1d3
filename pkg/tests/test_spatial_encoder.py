# SPDX-License-Identifier: GPL-2.0-or-later

import pytest
import torch

import chrono.spatial_encoder

from chrono.spatial_encoder import OPTICAL, RADAR


@pytest.fixture
def encoder():
    torch.manual_seed(0)
    return chrono.spatial_encoder.SpatialEncoder(4, d_feat=8, hidden=8, scales=(1, 2, 4)).eval()


def test_output_shape(encoder):
    feat = chrono.spatial_encoder.encode_acquisitions(torch.rand(2, 3, 4, 32, 32), OPTICAL, encoder)

    assert feat.values.shape == (6, 8, 16, 16)
    assert feat.unflatten().shape == (2, 3, 8, 16, 16)


def test_zero_input_with_zero_biases(encoder):
    with torch.no_grad():
        for name, p in encoder.named_parameters():
            if name.endswith("bias"):
                p.zero_()

    out = encoder(torch.zeros(1, 4, 16, 16))
    assert torch.equal(out, torch.zeros_like(out))


def test_acquisitions_are_encoded_independently(encoder):
    x = torch.rand(1, 3, 4, 16, 16)
    x[0, 2] = x[0, 0]

    with torch.no_grad():
        values = chrono.spatial_encoder.encode_acquisitions(x, OPTICAL, encoder).unflatten()
        permuted = chrono.spatial_encoder.encode_acquisitions(x[:, [1, 0, 2]], OPTICAL, encoder).unflatten()

    assert torch.allclose(values[0, 0], values[0, 2])
    assert torch.allclose(permuted[0, 0], values[0, 1])
    assert torch.allclose(permuted[0, 1], values[0, 0])


def test_spp_constant_map():
    f = torch.full((1, 3, 4, 4), 2.5)
    out = chrono.spatial_encoder.spp(f, (1, 2, 4))

    assert out.shape == (1, 12, 4, 4)
    assert torch.equal(out, torch.full_like(out, 2.5))


def test_spp_block_means():
    f = torch.arange(16, dtype=torch.float32).reshape(1, 1, 4, 4)
    out = chrono.spatial_encoder.spp(f, (1, 2))

    assert torch.allclose(out[0, 1], torch.full((4, 4), 7.5))
    assert float(out[0, 2, 0, 0]) == pytest.approx(2.5)
    assert float(out[0, 2, 3, 3]) == pytest.approx(12.5)


def test_spp_scale_too_large():
    with pytest.raises(ValueError):
        chrono.spatial_encoder.spp(torch.zeros(1, 1, 2, 2), (1, 4))


def test_input_checks(encoder):
    with pytest.raises(ValueError):
        chrono.spatial_encoder.encode_acquisitions(torch.zeros(1, 1, 2, 16, 16), OPTICAL, encoder)
    with pytest.raises(ValueError):
        chrono.spatial_encoder.encode_acquisitions(torch.zeros(1, 1, 4, 18, 16), OPTICAL, encoder)
    with pytest.raises(ValueError):
        chrono.spatial_encoder.encode_acquisitions(torch.zeros(1, 4, 16, 16), OPTICAL, encoder)


def test_empty_sequence(encoder):
    feat = chrono.spatial_encoder.encode_acquisitions(torch.zeros(2, 0, 4, 16, 16), OPTICAL, encoder)

    assert feat.values.shape == (0, 8, 8, 8)
    assert feat.unflatten().shape == (2, 0, 8, 8, 8)


def test_modalities_have_separate_weights():
    encoders = chrono.spatial_encoder.ModalityEncoders(d_feat=8, hidden=8)

    assert encoders[OPTICAL].stem.in_channels == 4
    assert encoders[RADAR].stem.in_channels == 2

    opt = {p.data_ptr() for p in encoders[OPTICAL].parameters()}
    sar = {p.data_ptr() for p in encoders[RADAR].parameters()}
    assert not opt & sar
