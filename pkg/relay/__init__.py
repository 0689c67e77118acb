from relay.wire import (Kind, Syn, SynAck, Ack, NConn, Ctr, Adv, Inv, GetSeg, Blk, Upd, Segment,
                        encode, decode, split_block, WIRE_VERSION, SEGMENT_SIZE)
from relay.checksum import ones_sum, udp_checksum, udp_checksum_cached
from relay.bloom import BloomFilter, bloom_params
from relay.sketch import CountMinSketch
from relay.switch import SwitchConfig, RelaySwitch, Datagram, Forward, secret_for
from relay.controller import RelayController, BlockVerdict, InvalidReason
from relay.client import RelayClient, Phase, DownloadStatus, Timer, Inbound, LocalNewBlock
