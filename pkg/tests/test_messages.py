import numpy as np
import pytest

from aggtherm.protocol.messages import (
    PROTOCOL_VERSION,
    Message,
    Phase,
    decode_message,
    encode_message,
)


def roundtrip(msg):
    return decode_message(encode_message(msg))


class TestEnvelope:
    def test_matrix_roundtrip(self):
        payload = np.arange(12.0).reshape(3, 4)
        msg = Message(iteration=2, phase=Phase.TE_UPLOAD, sender=3, receiver=0, payload=payload)
        back = roundtrip(msg)
        assert back.version == PROTOCOL_VERSION
        assert back.iteration == 2
        assert back.phase == Phase.TE_UPLOAD
        assert (back.sender, back.receiver) == (3, 0)
        assert np.array_equal(back.payload, payload)

    def test_vector_becomes_column(self):
        msg = Message(iteration=0, phase=Phase.SAP_S, sender=1, receiver=0,
                      payload=np.array([1.0, 2.0, 3.0]))
        assert msg.payload.shape == (3, 1)
        assert np.array_equal(roundtrip(msg).payload, msg.payload)

    def test_scalar_becomes_1x1(self):
        msg = Message(iteration=1, phase=Phase.XI_RETURN, sender=4, receiver=0,
                      payload=np.float64(0.25))
        assert msg.payload.shape == (1, 1)
        assert roundtrip(msg).payload[0, 0] == 0.25

    def test_payload_is_little_endian_f64(self):
        msg = Message(iteration=0, phase=Phase.SAP_S, sender=1, receiver=0,
                      payload=np.array([1.0]))
        data = encode_message(msg)
        # header: u16 version, u32 iteration, u8 phase, u32 sender, u32 receiver
        assert data[:2] == (1).to_bytes(2, "little")
        assert len(data) == 15 + 12 + 8
        assert data[-8:] == np.float64(1.0).tobytes()

    def test_truncated_rejected(self):
        data = encode_message(
            Message(iteration=0, phase=Phase.SAP_S, sender=1, receiver=0,
                    payload=np.ones(4))
        )
        with pytest.raises(ValueError):
            decode_message(data[:-1])
        with pytest.raises(ValueError):
            decode_message(data[:10])

    def test_count_dim_mismatch_rejected(self):
        data = bytearray(
            encode_message(
                Message(iteration=0, phase=Phase.SAP_S, sender=1, receiver=0,
                        payload=np.ones(4))
            )
        )
        data[15:19] = (5).to_bytes(4, "little")  # corrupt the count field
        with pytest.raises(ValueError):
            decode_message(bytes(data))

    def test_unknown_version_rejected(self):
        data = bytearray(
            encode_message(
                Message(iteration=0, phase=Phase.SAP_S, sender=1, receiver=0,
                        payload=np.ones(2))
            )
        )
        data[0:2] = (9).to_bytes(2, "little")
        with pytest.raises(ValueError, match="version"):
            decode_message(bytes(data))

    def test_all_phases_roundtrip(self):
        for phase in Phase:
            back = roundtrip(
                Message(iteration=5, phase=phase, sender=2, receiver=7,
                        payload=np.array([[1.5]]))
            )
            assert back.phase == phase
