from .sim import (
    CostModel,
    Delivery,
    Endpoint,
    PubSubChannel,
    PushPullChannel,
    SimNetwork,
    UnknownEndpoint,
    open_channel,
)
from .sockets import (
    Publisher,
    PullClient,
    PullServer,
    PushClient,
    PushServer,
    Subscriber,
    TransportFailure,
    recv_frame,
    send_frame,
)

__all__ = [
    "CostModel", "Delivery", "Endpoint", "PubSubChannel", "PushPullChannel", "SimNetwork",
    "UnknownEndpoint", "open_channel", "Publisher", "PullClient", "PullServer", "PushClient",
    "PushServer", "Subscriber", "TransportFailure", "recv_frame", "send_frame",
]
