"""
tests/test_controller.py
------------------------
Tests du controleur de relais et du modele de bloc.

Lancer les tests :
    python -m pytest tests/ -v
    ou
    python -m unittest tests.test_controller -v
"""

import unittest

from models.block import GENESIS_HASH, HEADER_SIZE, Block, bits_from_target, mine_block, target_from_bits
from relay.controller import DEFAULT_TARGET, MAX_BLOCK_BYTES, InvalidReason, RelayController
from relay.switch import RelaySwitch, SwitchConfig
from relay.wire import Blk, Inv, NConn, Upd

PEERS = [("10.0.0.9", 8333), ("10.0.0.3", 8333), ("10.0.1.7", 9000)]


def new_controller(**kwargs) -> RelayController:
    switch = RelaySwitch("198.51.100.1", config=SwitchConfig(peerlist_items=1000, blacklist_items=1000,
                                                             hashmem_items=1000))
    return RelayController(switch, **kwargs)


def mined(total_size: int, prev_hash: bytes = GENESIS_HASH, timestamp: int = 0) -> Block:
    body = bytes((i * 7) & 0xFF for i in range(total_size - HEADER_SIZE))
    return mine_block(prev_hash, body, DEFAULT_TARGET, timestamp=timestamp)


class TestBlock(unittest.TestCase):
    """Bloc simplifie et preuve de travail."""

    def test_minage(self):
        block = mined(200)
        self.assertLessEqual(block.hash_value, DEFAULT_TARGET)
        self.assertEqual(block.size, 200)
        self.assertEqual(Block.from_bytes(block.to_bytes()), block)

    def test_bits(self):
        self.assertEqual(bits_from_target(2 ** 248), 0x20010000)
        self.assertEqual(target_from_bits(bits_from_target(2 ** 248)), 2 ** 248)

    def test_bloc_trop_court(self):
        with self.assertRaises(ValueError):
            Block.from_bytes(bytes(HEADER_SIZE - 1))


class TestValidation(unittest.TestCase):

    def test_valide(self):
        verdict = new_controller().validate_block(mined(300))
        self.assertTrue(verdict)
        self.assertEqual(repr(verdict), "Valid")

    def test_preuve_de_travail(self):
        controller = new_controller(target=1)
        verdict = controller.validate_block(mined(300))
        self.assertFalse(verdict)
        self.assertEqual(verdict.reason, InvalidReason.BAD_POW)
        self.assertEqual(repr(verdict), "Invalid(BAD_POW)")

    def test_parent(self):
        verdict = new_controller().validate_block(mined(300, prev_hash=b"\x01" * 32))
        self.assertEqual(verdict.reason, InvalidReason.BAD_PARENT)

    def test_taille(self):
        block = Block(GENESIS_HASH, bytes(32), 0, 0, 0, bytes(MAX_BLOCK_BYTES))
        self.assertEqual(new_controller().validate_block(block).reason, InvalidReason.OVERSIZE)


class TestNewBlock(unittest.TestCase):
    """Mise a jour du switch et annonce aux pairs."""

    def setUp(self):
        self.controller = new_controller()
        for ip, port in PEERS:
            self.controller.on_nconn(NConn(ip, port), 0)

    def test_bloc_1mo(self):
        """Un bloc de 2^20 octets donne un UPD suivi de 1024 BLK."""
        out = self.controller.on_new_block(mined(1 << 20), 0)
        self.assertTrue(out.accepted)
        upd, blks = out.switch_messages[0], out.switch_messages[1:]
        self.assertIsInstance(upd, Upd)
        self.assertEqual(upd.seg_count, 1024)
        self.assertEqual(len(blks), 1024)
        self.assertTrue(all(isinstance(b, Blk) and b.cached_sum is not None for b in blks))

    def test_inv_aux_pairs(self):
        """Un INV par pair connu via NCONN, dans l'ordre des adresses."""
        block = mined(1500)
        out = self.controller.on_new_block(block, 0)
        self.assertEqual([d.dst for d in out.datagrams], sorted(PEERS))
        self.assertTrue(all(d.message == Inv(block.hash, 2) for d in out.datagrams))
        self.assertEqual(self.controller.chain_tip, block.hash)
        self.assertTrue(self.controller.switch.apply_update(out.switch_messages[0], out.switch_messages[1:]))

    def test_bloc_deja_connu(self):
        block = mined(500)
        self.controller.on_new_block(block, 0)
        again = self.controller.on_new_block(block, 10)
        self.assertIsNone(again.verdict)
        self.assertFalse(again.accepted)
        self.assertEqual(again.datagrams, [])

    def test_chaine(self):
        """Le bloc suivant doit designer le precedent comme parent."""
        first = mined(500)
        self.controller.on_new_block(first, 0)
        self.assertFalse(self.controller.on_new_block(mined(500, timestamp=1), 10).accepted)
        self.assertTrue(self.controller.on_new_block(mined(500, prev_hash=first.hash), 20).accepted)

    def test_bloc_invalide(self):
        out = new_controller(target=1).on_new_block(mined(300), 0)
        self.assertFalse(out.accepted)
        self.assertEqual(out.verdict.reason, InvalidReason.BAD_POW)
        self.assertEqual(out.switch_messages, [])


class TestInvRepeats(unittest.TestCase):

    def test_repetitions(self):
        controller = new_controller(inv_repeats=3, inv_interval_ms=500)
        controller.on_nconn(NConn(*PEERS[0]), 0)
        controller.on_new_block(mined(400), 0)
        self.assertEqual(controller.next_wakeup(), 500)
        self.assertEqual(controller.on_timer(400), [])
        self.assertEqual(len(controller.on_timer(500)), 1)
        self.assertEqual(controller.next_wakeup(), 1000)
        self.assertEqual(len(controller.on_timer(1000)), 1)
        self.assertIsNone(controller.next_wakeup())

    def test_inv_a_la_connexion(self):
        """Un pair connecte apres le bloc recoit l'INV courant."""
        controller = new_controller(inv_on_connect=True)
        self.assertEqual(controller.on_nconn(NConn(*PEERS[0]), 0), [])
        block = mined(400)
        controller.on_new_block(block, 0)
        sent = controller.on_nconn(NConn(*PEERS[1]), 10)
        self.assertEqual([d.message for d in sent], [Inv(block.hash, 1)])
        self.assertEqual(sent[0].dst, PEERS[1])

    def test_sans_inv_a_la_connexion(self):
        controller = new_controller()
        controller.on_new_block(mined(400), 0)
        self.assertEqual(controller.on_nconn(NConn(*PEERS[1]), 10), [])


if __name__ == "__main__":
    unittest.main()
