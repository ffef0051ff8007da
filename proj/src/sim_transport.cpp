#include <algorithm>
#include <queue>
#include <random>
#include <string>

#include "bnnswarm/errors.hpp"
#include "bnnswarm/transport.hpp"

namespace bnnswarm::protocol {

Topology Topology::fully_connected(std::uint32_t n) {
  Topology t;
  t.adj_.resize(n);
  for (NodeId i = 0; i < n; ++i)
    for (NodeId j = 0; j < n; ++j)
      if (i != j) t.adj_[i].push_back(j);
  return t;
}

Topology Topology::ring(std::uint32_t n) {
  std::vector<std::pair<NodeId, NodeId>> edges;
  for (NodeId i = 0; i < n; ++i) edges.emplace_back(i, (i + 1) % n);
  return from_edges(n, edges);
}

Topology Topology::from_edges(std::uint32_t n, const std::vector<std::pair<NodeId, NodeId>>& edges) {
  Topology t;
  t.adj_.resize(n);
  for (auto [a, b] : edges) {
    if (a >= n || b >= n) throw ConfigError("peer_protocol", "edge references a node outside the graph");
    if (a == b) continue;
    t.adj_[a].push_back(b);
    t.adj_[b].push_back(a);
  }
  for (auto& list : t.adj_) {
    std::sort(list.begin(), list.end());
    list.erase(std::unique(list.begin(), list.end()), list.end());
  }
  return t;
}

SimulatedNetwork::SimulatedNetwork(Topology topology, SimulatedNetworkConfig config)
    : topology_(std::move(topology)), config_(config) {}

namespace {

struct Event {
  double time;
  std::uint64_t seq;
  NodeId to;
  std::vector<std::uint8_t> frame;
};

struct Later {
  bool operator()(const Event& a, const Event& b) const {
    if (a.time != b.time) return a.time > b.time;
    return a.seq > b.seq;
  }
};

}  // namespace

SimulationStats SimulatedNetwork::run(std::vector<PeerNode>& nodes) {
  if (nodes.size() != topology_.size())
    throw ConfigError("peer_protocol", "simulated network expects one node per topology vertex");
  std::mt19937_64 rng(config_.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::priority_queue<Event, std::vector<Event>, Later> queue;
  std::uint64_t seq = 0;
  SimulationStats stats;

  auto broadcast = [&](NodeId from, const Message& msg, double now) {
    const auto frame = encode_message(msg);
    for (NodeId to : topology_.neighbors(from)) {
      if (config_.drop_probability > 0.0 && unit(rng) < config_.drop_probability) {
        ++stats.dropped;
        continue;
      }
      double delay = config_.base_delay;
      if (config_.jitter > 0.0) delay += config_.jitter * unit(rng);
      if (config_.reorder_probability > 0.0 && unit(rng) < config_.reorder_probability)
        delay += config_.reorder_delay * unit(rng);
      queue.push(Event{now + delay, seq++, to, frame});
    }
  };

  for (NodeId i = 0; i < nodes.size(); ++i) {
    if (nodes[i].id() != i) throw ConfigError("peer_protocol", "node ids must match their index");
    broadcast(i, nodes[i].start(), 0.0);
  }

  while (!queue.empty()) {
    Event ev = queue.top();
    queue.pop();
    stats.end_time = ev.time;
    PeerNode& node = nodes[ev.to];
    if (node.finished()) continue;
    ++stats.delivered;
    const Message msg = decode_message(ev.frame);
    for (const auto& out : node.deliver(msg)) broadcast(ev.to, out, ev.time);
  }

  std::string stuck;
  for (const auto& n : nodes)
    if (!n.finished())
      stuck += " " + std::to_string(n.id()) + "@" + std::to_string(n.runtime().round);
  if (!stuck.empty()) throw ProtocolError("no messages in flight but nodes not finished:" + stuck);
  return stats;
}

LocalHub::LocalHub(Topology topology, std::chrono::milliseconds timeout)
    : topology_(std::move(topology)), timeout_(timeout) {
  for (std::uint32_t i = 0; i < topology_.size(); ++i) boxes_.push_back(std::make_unique<Mailbox>());
}

void LocalHub::post(NodeId to, std::vector<std::uint8_t> frame) {
  auto& box = *boxes_.at(to);
  {
    std::lock_guard lock(box.mutex);
    box.frames.push_back(std::move(frame));
  }
  box.ready.notify_one();
}

std::vector<std::uint8_t> LocalHub::take(NodeId id) {
  auto& box = *boxes_.at(id);
  std::unique_lock lock(box.mutex);
  if (!box.ready.wait_for(lock, timeout_, [&] { return !box.frames.empty(); }))
    throw TransportError("node " + std::to_string(id) + " timed out waiting for a message");
  auto frame = std::move(box.frames.front());
  box.frames.pop_front();
  return frame;
}

class LocalEndpoint : public Transport {
 public:
  LocalEndpoint(LocalHub& hub, NodeId id) : hub_(hub), id_(id) {}

  void send(const Message& msg) override {
    const auto frame = encode_message(msg);
    for (NodeId to : hub_.topology_.neighbors(id_)) hub_.post(to, frame);
  }

  Message receive() override { return decode_message(hub_.take(id_)); }

 private:
  LocalHub& hub_;
  NodeId id_;
};

std::unique_ptr<Transport> LocalHub::endpoint(NodeId id) {
  if (id >= topology_.size()) throw ConfigError("peer_protocol", "endpoint id outside the topology");
  return std::make_unique<LocalEndpoint>(*this, id);
}

}  // namespace bnnswarm::protocol
