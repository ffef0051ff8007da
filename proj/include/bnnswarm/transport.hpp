#pragma once

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "bnnswarm/protocol.hpp"

namespace bnnswarm::protocol {

// Undirected communication graph over nodes 0..n-1.
class Topology {
 public:
  static Topology fully_connected(std::uint32_t n);
  static Topology ring(std::uint32_t n);
  static Topology from_edges(std::uint32_t n, const std::vector<std::pair<NodeId, NodeId>>& edges);

  std::uint32_t size() const { return static_cast<std::uint32_t>(adj_.size()); }
  const std::vector<NodeId>& neighbors(NodeId id) const { return adj_.at(id); }

 private:
  std::vector<std::vector<NodeId>> adj_;
};

struct SimulatedNetworkConfig {
  std::uint64_t seed = 1;
  double base_delay = 1.0;
  double jitter = 0.0;               // uniform extra delay in [0, jitter)
  double reorder_probability = 0.0;  // chance of an extra `reorder_delay` on a message
  double reorder_delay = 10.0;
  double drop_probability = 0.0;
};

struct SimulationStats {
  std::uint64_t delivered = 0;
  std::uint64_t dropped = 0;
  double end_time = 0.0;
};

// Deterministic discrete-event network. Owns the event queue and drives a
// set of PeerNodes (node i at index i) in virtual time. Every frame goes
// through encode/decode on the way.
class SimulatedNetwork {
 public:
  SimulatedNetwork(Topology topology, SimulatedNetworkConfig config);

  // Runs until no message is in flight. Throws ProtocolError naming the
  // stuck nodes if any node has not reached max_round.
  SimulationStats run(std::vector<PeerNode>& nodes);

 private:
  Topology topology_;
  SimulatedNetworkConfig config_;
};

// In-process blocking channels for running nodes on their own threads.
class LocalHub {
 public:
  LocalHub(Topology topology, std::chrono::milliseconds timeout = std::chrono::seconds(60));

  std::unique_ptr<Transport> endpoint(NodeId id);

 private:
  friend class LocalEndpoint;
  struct Mailbox {
    std::mutex mutex;
    std::condition_variable ready;
    std::deque<std::vector<std::uint8_t>> frames;
  };

  void post(NodeId to, std::vector<std::uint8_t> frame);
  std::vector<std::uint8_t> take(NodeId id);

  Topology topology_;
  std::chrono::milliseconds timeout_;
  std::vector<std::unique_ptr<Mailbox>> boxes_;
};

struct UdpPeer {
  NodeId id;
  std::string host;
  std::uint16_t port;
};

// Datagram transport. Frames larger than one datagram are split into
// fragments and reassembled on receipt. No retransmission.
class UdpTransport : public Transport {
 public:
  UdpTransport(NodeId self, std::uint16_t bind_port, std::vector<UdpPeer> neighbors,
               std::chrono::milliseconds timeout = std::chrono::seconds(60));
  ~UdpTransport() override;
  UdpTransport(const UdpTransport&) = delete;
  UdpTransport& operator=(const UdpTransport&) = delete;

  void send(const Message& msg) override;
  Message receive() override;

 private:
  struct Partial {
    std::uint16_t count = 0;
    std::uint16_t received = 0;
    std::vector<std::vector<std::uint8_t>> parts;
  };

  NodeId self_;
  int fd_ = -1;
  std::vector<UdpPeer> neighbors_;
  std::chrono::milliseconds timeout_;
  std::uint32_t next_seq_ = 0;
  std::map<std::pair<NodeId, std::uint32_t>, Partial> partial_;
};

}  // namespace bnnswarm::protocol
