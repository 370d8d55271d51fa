"""Server classes assembled from the protocol layers."""

from __future__ import annotations

from .node import ServerBase
from .replication import ReplicationMixin
from .viewchange import ViewChangeMixin


class ActiveServer(ViewChangeMixin, ReplicationMixin, ServerBase):
    """A server running active view change on top of two-phase replication."""

    def __init__(self, *args, **kwargs):
        super().__init__(*args, **kwargs)
        self._init_replication()
        self._init_view_change()
