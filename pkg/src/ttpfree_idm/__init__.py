"""无可信第三方的云身份管理：分布式 RSA、门限解密、属性访问树、Active Bundle 与 SSO。"""

__version__ = "0.1.0"
