"""Reading and writing artifacts on local disk or ``s3://bucket/key``."""

from datetime import datetime, timedelta
from pathlib import Path
from typing import Any

import opentaskpy.otflogging
from botocore.exceptions import ClientError
from dateutil.tz import tzlocal

from ..exceptions import StorageError
from ..remotehandlers.creds import S3Credentials, build_s3_client

logger = opentaskpy.otflogging.init_logging(__name__)

S3_SCHEME = "s3://"


def is_s3_uri(path: str | Path) -> bool:
    """True for ``s3://`` locations."""
    return str(path).startswith(S3_SCHEME)


def split_s3_uri(uri: str) -> tuple[str, str]:
    """Split ``s3://bucket/key`` into (bucket, key)."""
    bucket, _, key = uri[len(S3_SCHEME) :].partition("/")
    if not bucket:
        raise StorageError(f"no bucket in {uri}")
    return bucket, key


def join_location(base: str | Path, name: str) -> str:
    """Append a file name to a directory or S3 prefix."""
    if is_s3_uri(base):
        return f"{str(base).rstrip('/')}/{name}"
    return str(Path(base) / name)


class ArtifactStore:
    """Byte level access to local paths and S3 objects.

    The S3 client is created on first use from the protocol block (explicit
    keys, an assumed role or the standard AWS environment variables) and is
    rebuilt shortly before temporary credentials expire.
    """

    def __init__(self, protocol: dict[str, Any] | None = None):
        """Remember the credentials; nothing is contacted yet.

        Args:
            protocol: Optional ``protocol`` block of an execution spec
        """
        self.s3_credentials = S3Credentials.from_protocol(protocol)
        self.credentials = self.s3_credentials.as_dict()
        self.temporary_creds: dict | None = None
        self.s3_client: Any = None

    def validate_or_refresh_creds(self) -> None:
        """Create the S3 client, or renew it when temporary credentials are about to expire."""
        if self.s3_client and not self.temporary_creds:
            return

        if self.temporary_creds:
            logger.debug(
                f"Temporary creds expire at: {self.temporary_creds['Expiration']} - Now: {datetime.now(tz=tzlocal())}"
            )

        if not self.s3_client or (
            self.temporary_creds
            and self.temporary_creds["Expiration"]
            < datetime.now(tz=tzlocal()) + timedelta(minutes=1)
        ):
            if self.temporary_creds:
                logger.info("Renewing temporary credentials")

            self.s3_client, self.temporary_creds = build_s3_client(self.s3_credentials)

    def read_bytes(self, location: str | Path) -> bytes:
        """Return the contents of a file or object."""
        if not is_s3_uri(location):
            try:
                return Path(location).read_bytes()
            except OSError as ex:
                raise StorageError(f"cannot read {location}: {ex}") from ex
        bucket, key = split_s3_uri(str(location))
        self.validate_or_refresh_creds()
        try:
            response = self.s3_client.get_object(Bucket=bucket, Key=key)
        except ClientError as ex:
            raise StorageError(f"cannot read {location}: {ex}") from ex
        body: bytes = response["Body"].read()
        logger.debug(f"Read {len(body)} bytes from {location}")
        return body

    def write_bytes(self, location: str | Path, data: bytes) -> None:
        """Write a file or object, creating local parent directories."""
        if not is_s3_uri(location):
            path = Path(location)
            try:
                path.parent.mkdir(parents=True, exist_ok=True)
                path.write_bytes(data)
            except OSError as ex:
                raise StorageError(f"cannot write {location}: {ex}") from ex
            return
        bucket, key = split_s3_uri(str(location))
        self.validate_or_refresh_creds()
        try:
            self.s3_client.put_object(Bucket=bucket, Key=key, Body=data)
        except ClientError as ex:
            raise StorageError(f"cannot write {location}: {ex}") from ex
        logger.info(f"Wrote {len(data)} bytes to {location}")

    def read_text(self, location: str | Path) -> str:
        """UTF-8 variant of ``read_bytes``."""
        return self.read_bytes(location).decode("utf-8")

    def write_text(self, location: str | Path, text: str) -> None:
        """UTF-8 variant of ``write_bytes``."""
        self.write_bytes(location, text.encode("utf-8"))

    def close(self) -> None:
        """Release the S3 client, if one was created."""
        if self.s3_client is not None:
            self.s3_client.close()
            self.s3_client = None
            self.temporary_creds = None
