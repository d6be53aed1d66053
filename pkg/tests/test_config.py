import textwrap

import pytest

from noclink.config import ConfigError, build_simulation, parse_config

NODE_TYPES = """\
<nodeTypes>
    <nodeType id="0">
        <model value="RouterVC"/>
        <routing value="XYZ"/>
        <selection value="RoundRobin"/>
        <arbitration value="fair"/>
        <clockDelay value="1"/>
    </nodeType>
    <nodeType id="1">
        <model value="ProcessingElementVC"/>
        <clockDelay value="2"/>
    </nodeType>
</nodeTypes>
"""

TOPOLOGY = """\
<topology>
    <node id="A" x="0" y="0" z="0"/>
    <node id="B" x="1" y="0" z="0"/>
</topology>
<flitWidth value="16"/>
"""


def write_config(tmp_path, body, name="sim.xml"):
    path = tmp_path / name
    path.write_text(f"<simulation>\n{textwrap.indent(body, '  ')}</simulation>\n")
    return path


def minimal(tmp_path, extra="", node_types=NODE_TYPES):
    return write_config(tmp_path, node_types + TOPOLOGY + extra)


class TestNodeTypes:
    def test_verbatim_listing_parses(self, tmp_path):
        cfg = parse_config(minimal(tmp_path))
        router = cfg.node_types[0]
        assert router.model == "RouterVC"
        assert router.routing == "xyz"
        assert router.selection == "round_robin"
        assert router.arbitration == "fair"
        assert router.clock_delay == 1
        assert cfg.node_types[1].model == "ProcessingElementVC"
        assert cfg.pe_clock_delay == 2
        assert cfg.router_cfg.clock_delay == 1

    def test_missing_model_names_node_type(self, tmp_path):
        broken = NODE_TYPES.replace('<model value="RouterVC"/>', "")
        path = minimal(tmp_path, node_types=broken)
        with pytest.raises(ConfigError, match="nodeType id=0"):
            parse_config(path)

    def test_priority_arbitration_selected(self, tmp_path):
        body = NODE_TYPES.replace('value="fair"', 'value="priority"')
        cfg = parse_config(minimal(tmp_path, node_types=body))
        assert cfg.router_cfg.arbitration == "priority"

    def test_unknown_arbitration_rejected(self, tmp_path):
        body = NODE_TYPES.replace('value="fair"', 'value="lottery"')
        with pytest.raises(ConfigError, match="lottery"):
            parse_config(minimal(tmp_path, node_types=body))

    def test_unknown_child_rejected_with_line(self, tmp_path):
        body = NODE_TYPES.replace(
            '<clockDelay value="2"/>', '<clockDelay value="2"/>\n<turbo value="1"/>'
        )
        with pytest.raises(ConfigError, match=r"<turbo> at line \d+"):
            parse_config(minimal(tmp_path, node_types=body))


class TestTopLevel:
    def test_unknown_element_rejected(self, tmp_path):
        with pytest.raises(ConfigError, match="plugins"):
            parse_config(minimal(tmp_path, extra="<plugins/>\n"))

    def test_defaults(self, tmp_path):
        cfg = parse_config(minimal(tmp_path))
        assert cfg.flit_width == 16
        assert cfg.router_cfg.vc_count == 1
        assert cfg.router_cfg.buffer_depth == 4
        assert cfg.flits_per_packet == 32
        assert cfg.clock_period == 1e-9

    def test_explicit_values(self, tmp_path):
        extra = '<vcCount value="4"/>\n<bufferDepth value="8"/>\n<flitsPerPacket value="16"/>\n'
        cfg = parse_config(minimal(tmp_path, extra=extra))
        assert cfg.router_cfg.vc_count == 4
        assert cfg.router_cfg.buffer_depth == 8
        assert cfg.flits_per_packet == 16

    def test_duplicate_node_rejected(self, tmp_path):
        body = NODE_TYPES + TOPOLOGY.replace('id="B"', 'id="A"')
        with pytest.raises(ConfigError, match="duplicate node"):
            parse_config(write_config(tmp_path, body))

    def test_malformed_xml(self, tmp_path):
        path = tmp_path / "bad.xml"
        path.write_text("<simulation><nodeTypes>")
        with pytest.raises(ConfigError, match="malformed"):
            parse_config(path)


class TestTraffic:
    def test_flow_parsed(self, tmp_path):
        extra = (
            "<traffic>\n"
            '  <flow src="A" dst="B" rate="0.2" payload="uniform" seed="5"/>\n'
            "</traffic>\n"
        )
        cfg = parse_config(minimal(tmp_path, extra=extra))
        (spec,) = cfg.traffic
        assert (spec.src, spec.dst, spec.rate) == ("A", "B", 0.2)

    def test_rate_out_of_range(self, tmp_path):
        extra = (
            "<traffic>\n"
            '  <flow src="A" dst="B" rate="1.5" payload="uniform"/>\n'
            "</traffic>\n"
        )
        with pytest.raises(ConfigError, match="1.5"):
            parse_config(minimal(tmp_path, extra=extra))

    def test_empty_traffic_builds_idle_network(self, tmp_path):
        cfg = parse_config(minimal(tmp_path, extra="<traffic/>\n"))
        net = build_simulation(cfg, seed=0)
        result = net.run(100)
        assert result.injected_flits == 0

    def test_build_simulation_runs(self, tmp_path):
        extra = (
            '<vcCount value="2"/>\n<flitsPerPacket value="4"/>\n'
            "<traffic>\n"
            '  <flow src="A" dst="B" rate="0.1" payload="uniform" seed="5"/>\n'
            "</traffic>\n"
        )
        cfg = parse_config(minimal(tmp_path, extra=extra))
        result = build_simulation(cfg, seed=2).run(2000)
        assert result.injected_flits > 0
        assert result.ejected_flits > 0
