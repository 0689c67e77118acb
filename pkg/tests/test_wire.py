"""
tests/test_wire.py
------------------
Tests du format binaire des messages et du checksum UDP incremental.

Lancer les tests :
    python -m pytest tests/ -v
    ou
    python -m unittest tests.test_wire -v
"""

import random
import unittest

from models.errors import DecodeError, DecodeFailure
from relay.checksum import ones_sum, swap16, udp_checksum, udp_checksum_cached, UDP_HEADER_SIZE
from relay.wire import (
    Ack,
    Adv,
    Blk,
    Ctr,
    GetSeg,
    Inv,
    NConn,
    Segment,
    Syn,
    SynAck,
    Upd,
    decode,
    encode,
    split_block,
)

ZERO_HASH = bytes(32)
SOME_HASH = bytes(range(32))


class TestEncoding(unittest.TestCase):
    """Valeurs de reference et aller-retour."""

    def test_syn(self):
        self.assertEqual(encode(Syn()).hex(), "010100")

    def test_get_seg(self):
        self.assertEqual(encode(GetSeg(ZERO_HASH, 1)).hex(), "010800" + "00" * 32 + "0001")

    def test_blk_avec_somme(self):
        """Le drapeau bit0 annonce les deux octets de somme en fin de message."""
        blk = Blk(SOME_HASH, 0, 2, b"\xaa\xbb\xcc", 0x1234)
        data = encode(blk)
        self.assertEqual(data[:3].hex(), "010901")
        self.assertEqual(data[-2:], b"\x12\x34")
        self.assertEqual(len(data), 3 + 38 + 3 + 2)
        self.assertEqual(encode(blk.without_sum())[:3].hex(), "010900")

    def test_aller_retour(self):
        messages = [
            Syn(), Ctr(), SynAck(0xDEADBEEF), Ack(7), NConn("203.0.113.9", 8333),
            Adv(SOME_HASH), Inv(SOME_HASH, 1024), Upd(SOME_HASH, 2), GetSeg(SOME_HASH, 65535),
            Blk(SOME_HASH, 1, 2, b"segment", 0xBEEF), Blk(SOME_HASH, 0, 1, b""),
        ]
        for message in messages:
            self.assertEqual(decode(encode(message)), message, repr(message))

    def test_champs_invalides(self):
        with self.assertRaises(ValueError):
            Adv(b"court")
        with self.assertRaises(ValueError):
            SynAck(2 ** 32)
        with self.assertRaises(ValueError):
            Blk(SOME_HASH, 2, 2, b"")
        with self.assertRaises(ValueError):
            Blk(SOME_HASH, 0, 1, bytes(1025))
        with self.assertRaises(ValueError):
            NConn("pas-une-ip", 1)


class TestDecodeErrors(unittest.TestCase):
    """Chaque rejet porte sa raison."""

    def assertReason(self, data: bytes, reason: DecodeFailure):
        with self.assertRaises(DecodeError) as ctx:
            decode(data)
        self.assertEqual(ctx.exception.reason, reason, data.hex())

    def test_entete(self):
        self.assertReason(b"", DecodeFailure.TRUNCATED)
        self.assertReason(b"\x01\x01", DecodeFailure.TRUNCATED)
        self.assertReason(b"\x02\x01\x00", DecodeFailure.BAD_VERSION)
        self.assertReason(b"\x01\xff\x00", DecodeFailure.UNKNOWN_KIND)
        self.assertReason(b"\x01\x00\x00", DecodeFailure.UNKNOWN_KIND)

    def test_drapeaux(self):
        """Seul BLK accepte le bit0 ; les autres bits sont toujours refuses."""
        self.assertReason(b"\x01\x01\x01", DecodeFailure.BAD_FLAGS)
        data = bytearray(encode(Blk(SOME_HASH, 0, 1, b"ab")))
        data[2] = 0x02
        self.assertReason(bytes(data), DecodeFailure.BAD_FLAGS)

    def test_octets_en_trop(self):
        self.assertReason(encode(Syn()) + b"\x00", DecodeFailure.TRAILING_BYTES)
        self.assertReason(encode(Adv(SOME_HASH)) + b"\x00", DecodeFailure.TRAILING_BYTES)

    def test_troncatures(self):
        """Tout prefixe strict d'un message avec charge est tronque."""
        for message in (Inv(SOME_HASH, 3), Blk(SOME_HASH, 0, 1, b"xyz", 5), NConn("10.0.0.1", 1)):
            data = encode(message)
            for cut in range(len(data)):
                self.assertReason(data[:cut], DecodeFailure.TRUNCATED)

    def test_champ_invalide(self):
        """Un BLK dont l'indice depasse le nombre de segments est refuse."""
        data = bytearray(encode(Blk(SOME_HASH, 0, 1, b"")))
        data[3 + 32:3 + 34] = (5).to_bytes(2, "big")
        self.assertReason(bytes(data), DecodeFailure.INVALID_FIELD)


class TestChecksum(unittest.TestCase):
    """Somme en complement a un et checksum UDP."""

    def test_ones_sum(self):
        self.assertEqual(ones_sum(b"\x00\x01\xf2\x03"), 0xF204)
        self.assertEqual(ones_sum(b"\x00\x01\xf2\x03\xf4\xf5\xf6\xf7"), 0xDDF2)
        self.assertEqual(ones_sum(b""), 0)
        self.assertEqual(ones_sum(b"\xab"), 0xAB00)

    def test_swap16(self):
        self.assertEqual(swap16(0x1234), 0x3412)

    def test_checksum_jamais_nul(self):
        """Un checksum calcule a 0 est transmis comme 0xFFFF."""
        for seed in range(50):
            data = random.Random(seed).randbytes(17)
            self.assertNotEqual(udp_checksum("10.0.0.1", "10.0.0.2", 1, 2, data), 0)

    def test_somme_en_cache(self):
        """Le calcul incremental egale le calcul complet, quelle que soit la parite."""
        rng = random.Random(1)
        for _ in range(40):
            payload = rng.randbytes(rng.randint(0, 1024))
            blk = Blk(SOME_HASH, 0, 1, payload)
            data = encode(blk)
            src = f"10.{rng.randint(0, 255)}.{rng.randint(0, 255)}.1"
            ports = (rng.randint(1, 65535), rng.randint(1, 65535))
            expected = udp_checksum(src, "192.0.2.1", *ports, data)
            cached = udp_checksum_cached(src, "192.0.2.1", *ports, UDP_HEADER_SIZE + len(data),
                                         blk.header_bytes(), ones_sum(payload))
            self.assertEqual(cached, expected)

            header = rng.randbytes(2 * rng.randint(0, 4))
            self.assertEqual(
                udp_checksum_cached(src, "192.0.2.1", *ports, UDP_HEADER_SIZE + len(header) + len(payload),
                                    header, ones_sum(payload)),
                udp_checksum(src, "192.0.2.1", *ports, header + payload),
            )


class TestSegmentation(unittest.TestCase):

    def test_bloc_1mo(self):
        """Un bloc de 2^20 octets donne 1024 segments pleins."""
        blks = split_block(SOME_HASH, bytes(1 << 20))
        self.assertEqual(len(blks), 1024)
        self.assertTrue(all(len(b.payload) == 1024 and b.seg_count == 1024 for b in blks))

    def test_bloc_1500(self):
        blks = split_block(SOME_HASH, bytes(1500))
        self.assertEqual([len(b.payload) for b in blks], [1024, 476])
        self.assertEqual([b.seg_id for b in blks], [0, 1])

    def test_sommes_en_cache(self):
        body = random.Random(3).randbytes(3000)
        for blk in split_block(SOME_HASH, body):
            self.assertEqual(blk.cached_sum, ones_sum(blk.payload))
            self.assertTrue(Segment.from_bytes(blk.seg_id, blk.payload).is_valid())

    def test_bloc_vide(self):
        blks = split_block(SOME_HASH, b"")
        self.assertEqual(len(blks), 1)
        self.assertEqual(blks[0].payload, b"")

    def test_segment_corrompu(self):
        segment = Segment.from_bytes(0, b"\x01\x02\x03\x04")
        self.assertFalse(Segment(0, b"\x01\x02\x03\x05", segment.cached_sum).is_valid())


if __name__ == "__main__":
    unittest.main()
